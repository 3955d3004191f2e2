"""Cost instrumentation: comparison counts and wall-clock timings.

Comparison counts come from running Python's sort with a counting comparator
over the exact values each selector has to order: the ``N_a``-long
projected azimuth profile of every range slice for step 2, and the whole
``N_r * N_a * N_e`` tensor for the global top-percent baseline.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from functools import cmp_to_key

import numpy as np

from .cfar import top_percent_mask
from .pipeline import CctpConfig, cctp_step1, cctp_step2, cctp_step3, vertical_projection
from .synth import generate_noise
from .tensor import PolarGrid, RadarTensor


def counted_sort(values) -> tuple[list[int], int]:
    """Indices ordering ``values`` descending (stable) and the comparison count."""
    v = [float(x) for x in np.asarray(values).ravel()]
    count = 0

    def cmp(i, j):
        nonlocal count
        count += 1
        return (v[j] > v[i]) - (v[j] < v[i])

    return sorted(range(len(v)), key=cmp_to_key(cmp)), count


def per_range_comparisons(m1: RadarTensor) -> int:
    proj = vertical_projection(m1)
    return sum(counted_sort(row)[1] for row in proj)


def global_sort_comparisons(t: RadarTensor) -> int:
    return counted_sort(t.power)[1]


def comparison_ratio(global_count: int, per_range_count: int) -> float:
    # floors keep the ratio defined on degenerate grids with zero comparisons
    return max(global_count, 1) / max(per_range_count, 1)


@dataclass(frozen=True)
class BenchStat:
    stage: str
    metric: str
    values: tuple[float, ...]

    @property
    def min(self):
        return min(self.values)

    @property
    def median(self):
        return statistics.median(self.values)

    @property
    def max(self):
        return max(self.values)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run_bench(grid: PolarGrid, repeat: int = 3, seed: int = 0,
              cfg: CctpConfig | None = None, baseline_percent: float = 10.0) -> list[BenchStat]:
    """Time each pipeline stage and the global-sort baseline on exponential noise."""
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    cfg = cfg or CctpConfig()
    raw = generate_noise(grid, 1.0, seed)
    times: dict[str, list[float]] = {k: [] for k in
                                     ("step1", "step2", "step3", "global_top_percent")}
    for _ in range(repeat):
        m1, t1 = _timed(lambda: cctp_step1(raw, cfg))
        s2, t2 = _timed(lambda: cctp_step2(m1, cfg.k2_percent, cfg.pairing))
        sel = s2.selections if cfg.pairing == "pairwise" else None
        _, t3 = _timed(lambda: cctp_step3(m1, s2.j_r, s2.j_a, cfg.d_r, cfg.d_a, sel))
        _, tg = _timed(lambda: top_percent_mask(raw.power, baseline_percent))
        for k, t in zip(times, (t1, t2, t3, tg)):
            times[k].append(t)

    m1 = cctp_step1(raw, cfg)
    per = per_range_comparisons(m1)
    glob = global_sort_comparisons(raw)
    stats = [BenchStat(k, "wall_s", tuple(v)) for k, v in times.items()]
    ratio_wall = tuple(g / max(s, 1e-12) for g, s in zip(times["global_top_percent"], times["step2"]))
    stats += [
        BenchStat("step2", "comparisons", (per,)),
        BenchStat("global_top_percent", "comparisons", (glob,)),
        BenchStat("global/step2", "comparison_ratio", (comparison_ratio(glob, per),)),
        BenchStat("global/step2", "wall_ratio", ratio_wall),
    ]
    return stats


def bench_csv(stats, grid: PolarGrid) -> str:
    lines = ["grid,stage,metric,n,min,median,max"]
    dims = "x".join(str(n) for n in grid.shape)
    for s in stats:
        lines.append(f"{dims},{s.stage},{s.metric},{len(s.values)},"
                     f"{s.min:.9g},{s.median:.9g},{s.max:.9g}")
    return "\n".join(lines) + "\n"
