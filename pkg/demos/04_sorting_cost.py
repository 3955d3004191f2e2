"""Comparison counts: per-range azimuth selection versus one global sort."""

from radarcctp.bench import comparison_ratio, global_sort_comparisons, per_range_comparisons
from radarcctp.pipeline import CctpConfig, cctp_step1
from radarcctp.synth import generate_noise
from radarcctp.tensor import PolarGrid

for n_e in (4, 8, 16, 32):
    grid = PolarGrid(64, 48, n_e)
    raw = generate_noise(grid, 1.0, seed=0)
    per = per_range_comparisons(cctp_step1(raw, CctpConfig()))
    glob = global_sort_comparisons(raw)
    print(f"N_e = {n_e:2d}: global {glob:9d}, per-range {per:7d}, "
          f"ratio {comparison_ratio(glob, per):6.1f}")
