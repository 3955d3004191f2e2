"""PRVM / RRIM evaluation of filter outputs against ground-truth valid masks.

PRVM is the fraction of valid cells a filter keeps, RRIM the fraction of
invalid cells it removes.  Cells are assigned to range bins by their range
bin centre; bins are half-open ``[start, end)`` except the last, which also
includes its end.  Cells outside the RoI are ignored.  A ratio whose
denominator is zero is ``None`` (written ``NA``), never 0.

Sweep grid syntax::

    grid  = item { ";" item }
    item  = key "=" value { "," value }
    key   = "k1" | "k2" | "dr" | "da" | "step1" | "stages"
            | "train" | "guard" | "pairing" | "recover"

``step1`` takes ``ca`` / ``top``, ``stages`` any of ``1,2,3``.  Each K1 yields
its step-1-only row, then per K2 the step-2 row and one step-3 row per
``(dr, da)`` pair.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .cfar import CaCfarConfig
from .errors import DomainError, GridMismatch
from .pipeline import CctpConfig, config_label, run_cctp
from .tensor import BoolMask, RadarTensor

CSV_HEADER = "label,bin_start_m,bin_end_m,prvm,rrim,valid_count,invalid_count"
DEFAULT_GRID = "k1=2.5,5,10;k2=2.5,5,10,15"
COST_WARN_K1 = 10.0


@dataclass(frozen=True)
class RangeBins:
    edges: tuple[float, ...]

    def __post_init__(self):
        e = tuple(float(x) for x in self.edges)
        if len(e) < 2 or any(b <= a for a, b in zip(e, e[1:])):
            raise DomainError("range bins need >= 2 strictly ascending edges")
        object.__setattr__(self, "edges", e)

    @classmethod
    def uniform(cls, start: float, stop: float, width: float) -> "RangeBins":
        n = int(round((stop - start) / width))
        return cls(tuple(start + width * k for k in range(n + 1)))

    def __len__(self):
        return len(self.edges) - 1

    def assign(self, r: np.ndarray) -> np.ndarray:
        """Bin id per range value, -1 outside the RoI."""
        r = np.asarray(r, dtype=np.float64)
        e = np.asarray(self.edges)
        ids = np.searchsorted(e, r, side="right") - 1
        ids[r == e[-1]] = len(self) - 1
        ids[(r < e[0]) | (r > e[-1])] = -1
        return ids


def default_bins() -> RangeBins:
    """Nine 8 m bins over 0-72 m."""
    return RangeBins.uniform(0.0, 72.0, 8.0)


@dataclass(frozen=True)
class BinStats:
    start_m: float
    end_m: float
    valid_count: int
    invalid_count: int
    kept_valid: int
    removed_invalid: int

    @property
    def prvm(self) -> float | None:
        return self.kept_valid / self.valid_count if self.valid_count else None

    @property
    def rrim(self) -> float | None:
        return self.removed_invalid / self.invalid_count if self.invalid_count else None


@dataclass(frozen=True)
class PrvmRrimReport:
    per_bin: tuple[BinStats, ...]
    overall: BinStats


def prvm_rrim(filtered: BoolMask, valid: BoolMask, bins: RangeBins | None = None) -> PrvmRrimReport:
    """Per-bin and overall PRVM/RRIM of the ``filtered`` nonzero pattern."""
    if filtered.grid != valid.grid:
        raise GridMismatch(f"filtered grid {filtered.grid.shape} != valid grid {valid.grid.shape}")
    bins = bins or default_bins()
    f, v = filtered.bits, valid.bits
    # per range-slice counts, then fold slices into bins
    per_r = np.stack([
        v.sum(axis=(1, 2)),
        (~v).sum(axis=(1, 2)),
        (f & v).sum(axis=(1, 2)),
        (~f & ~v).sum(axis=(1, 2)),
    ], axis=1).astype(np.int64)
    ids = bins.assign(filtered.grid.range_centers())
    rows = []
    for k in range(len(bins)):
        c = per_r[ids == k].sum(axis=0)
        rows.append(BinStats(bins.edges[k], bins.edges[k + 1], *(int(x) for x in c)))
    tot = per_r[ids >= 0].sum(axis=0)
    overall = BinStats(bins.edges[0], bins.edges[-1], *(int(x) for x in tot))
    return PrvmRrimReport(tuple(rows), overall)


# -- sweeps ------------------------------------------------------------------

_GRID_KEYS = {"k1", "k2", "dr", "da", "step1", "stages", "train", "guard", "pairing", "recover"}


def parse_grid(text: str) -> list[CctpConfig]:
    """Expand a sweep grid string into an ordered list of configs."""
    spec: dict[str, list[str]] = {}
    for item in filter(None, (s.strip() for s in text.split(";"))):
        if "=" not in item:
            raise DomainError(f"grid item {item!r} is not key=values")
        key, vals = (s.strip() for s in item.split("=", 1))
        if key not in _GRID_KEYS:
            raise DomainError(f"unknown grid key {key!r}")
        if key in spec:
            raise DomainError(f"grid key {key!r} given twice")
        spec[key] = [v.strip() for v in vals.split(",") if v.strip()]
        if not spec[key]:
            raise DomainError(f"grid key {key!r} has no values")

    def floats(key, default):
        try:
            return [float(v) for v in spec.get(key, default)]
        except ValueError:
            raise DomainError(f"grid key {key!r} needs numbers") from None

    def ints(key, default):
        vals = floats(key, default)
        if any(v != int(v) for v in vals):
            raise DomainError(f"grid key {key!r} needs integers")
        return [int(v) for v in vals]

    k1s = floats("k1", ["5"])
    k2s = floats("k2", [])
    d_pairs = list(product(ints("dr", ["2"]), ints("da", ["1"])))
    stages = set(ints("stages", ["1", "2", "3"]))
    if not stages <= {1, 2, 3}:
        raise DomainError("stages must be drawn from 1,2,3")
    train, = ints("train", ["16"])[:1]
    guard, = ints("guard", ["2"])[:1]
    ca = CaCfarConfig(train, guard)
    pairing = spec.get("pairing", ["pairwise"])[0]
    recover = spec.get("recover", ["m1"])[0]

    configs = []
    for mode, k1 in product(spec.get("step1", ["ca"]), k1s):
        common = dict(ca=ca, step1_mode=mode, pairing=pairing, recover_from=recover)
        if 1 in stages:
            configs.append(CctpConfig(k1, None, None, None, **common))
        for k2 in k2s:
            if 2 in stages:
                configs.append(CctpConfig(k1, k2, None, None, **common))
            if 3 in stages:
                configs.extend(CctpConfig(k1, k2, dr, da, **common) for dr, da in d_pairs)
    if not configs:
        raise DomainError("grid expands to no configurations")
    return configs


def ablation_configs(ca: CaCfarConfig | None = None) -> list[CctpConfig]:
    """The thirteen standard ablation rows, 2.5-Nan-Nan through 20-Nan-Nan, in order."""
    ca = ca or CaCfarConfig()
    rows = [(2.5, None), (2.5, 2.5)]
    rows += [(5, None)] + [(5, k2) for k2 in (2.5, 5, 10, 15)]
    rows += [(10, None)] + [(10, k2) for k2 in (2.5, 5, 10, 15)]
    rows += [(20, None)]
    return [CctpConfig(k1, k2, *((2, 1) if k2 else (None, None)), ca=ca) for k1, k2 in rows]


@dataclass(frozen=True)
class SweepRow:
    label: str
    config: CctpConfig
    report: PrvmRrimReport
    nesting_ok: bool
    kept_cells: int

    @property
    def cost_warning(self) -> bool:
        return self.config.k1_percent > COST_WARN_K1


def _threads() -> int:
    raw = os.environ.get("CCTP_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else min(8, os.cpu_count() or 1)


def sweep_report(tensor: RadarTensor, valid: BoolMask, configs: Sequence[CctpConfig],
                 bins: RangeBins | None = None, max_workers: int | None = None) -> list[SweepRow]:
    """One row per config, in config order regardless of execution order."""
    if tensor.grid != valid.grid:
        raise GridMismatch("scene tensor and valid mask grids differ")
    bins = bins or default_bins()

    def one(cfg):
        out = run_cctp(tensor, cfg)
        final = out.final
        return SweepRow(config_label(cfg), cfg, prvm_rrim(final.nonzero_mask(), valid, bins),
                        out.nesting_ok(), final.count_nonzero())

    workers = max_workers or _threads()
    if workers <= 1 or len(configs) <= 1:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, configs))


def _fmt(x: float | None) -> str:
    return "NA" if x is None else f"{x:.6f}"


def _fmt_edge(x: float) -> str:
    return f"{x:g}"


def report_rows(label: str, report: PrvmRrimReport) -> list[list[str]]:
    """CSV records for one report: per-bin rows then the overall row."""
    return [[label, _fmt_edge(b.start_m), _fmt_edge(b.end_m), _fmt(b.prvm), _fmt(b.rrim),
             str(b.valid_count), str(b.invalid_count)]
            for b in (*report.per_bin, report.overall)]


def write_csv(records_by_label) -> str:
    """Render ``(label, report)`` pairs; labels containing commas are quoted."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for label, report in records_by_label:
        w.writerows(report_rows(label, report))
    return buf.getvalue()


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    return write_csv((row.label, row.report) for row in rows)


def parse_csv(text: str) -> list[dict]:
    """Inverse of :func:`write_csv` (``NA`` becomes ``None``)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER.split(","):
        raise DomainError("not a PRVM/RRIM CSV")
    conv = lambda x: None if x == "NA" else float(x)  # noqa: E731
    return [dict(label=label, bin_start_m=float(s), bin_end_m=float(e), prvm=conv(p),
                 rrim=conv(r), valid_count=int(vc), invalid_count=int(ic))
            for label, s, e, p, r, vc, ic in reader]


def relative_change(new: float, old: float) -> float:
    return (new - old) / old if old else math.inf
