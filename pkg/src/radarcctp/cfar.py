"""Detector primitives: cell-averaging CFAR, global top-percent selection and
per-vector top-K% selection.

All comparisons run in float64.  Quotas use ``ceil(percent * n / 100)`` so
any positive percentage keeps at least one cell, and ties are always broken
toward the lower index / linear offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tensor import RadarTensor


@dataclass(frozen=True)
class CaCfarConfig:
    """CA-CFAR window geometry (cells per side) and design false-alarm rate."""

    train_cells: int = 16
    guard_cells: int = 2
    pfa: float = 0.05

    def __post_init__(self):
        if int(self.train_cells) != self.train_cells or self.train_cells < 1:
            raise DomainError(f"train_cells must be an integer >= 1, got {self.train_cells!r}")
        if int(self.guard_cells) != self.guard_cells or self.guard_cells < 0:
            raise DomainError(f"guard_cells must be an integer >= 0, got {self.guard_cells!r}")
        _check_pfa(self.pfa)

    @classmethod
    def from_k1(cls, k1_percent: float, train_cells: int = 16, guard_cells: int = 2):
        return cls(train_cells, guard_cells, k1_percent / 100.0)


@dataclass(frozen=True)
class TopPercentConfig:
    percent: float

    def __post_init__(self):
        check_percent(self.percent)


def _check_pfa(pfa):
    if not (0.0 < pfa < 1.0):
        raise DomainError(f"pfa must lie in (0, 1), got {pfa!r}")


def check_percent(percent) -> None:
    if not (0.0 < percent <= 100.0):
        raise DomainError(f"percent must lie in (0, 100], got {percent!r}")


def quota(percent: float, n: int) -> int:
    """Number of cells kept by a top-``percent`` selection over ``n`` cells."""
    check_percent(percent)
    return min(n, math.ceil(percent * n / 100.0))


def ca_threshold_factor(pfa: float, n_train_total: int) -> float:
    """Scale ``alpha`` such that ``x > alpha * mean(train)`` has false-alarm rate ``pfa``
    for i.i.d. exponential noise and ``n_train_total`` training cells."""
    _check_pfa(pfa)
    if n_train_total < 1:
        raise DomainError("need at least one training cell")
    n = n_train_total
    return n * (pfa ** (-1.0 / n) - 1.0)


def _training_offsets(cfg: CaCfarConfig) -> list[int]:
    g, t = cfg.guard_cells, cfg.train_cells
    return list(range(-g - t, -g)) + list(range(g + 1, g + t + 1))


def ca_cfar(values: np.ndarray, cfg: CaCfarConfig, axis: int = 0) -> np.ndarray:
    """CA-CFAR pass mask along ``axis`` of an array of any rank.

    The training window is clamped at the array borders and ``alpha`` is
    recomputed for the number of training cells actually available.  A cell
    with no training cells at all (axis shorter than ``guard + 2``) passes
    iff it is strictly positive.
    """
    x = np.moveaxis(np.asarray(values, dtype=np.float64), axis, 0)
    n = x.shape[0]
    total = np.zeros_like(x)
    count = np.zeros(n, dtype=np.int64)
    # ascending window order, so sums match a left-to-right loop bit for bit
    for off in _training_offsets(cfg):
        lo, hi = max(0, -off), min(n, n - off)
        if lo >= hi:
            continue
        total[lo:hi] += x[lo + off:hi + off]
        count[lo:hi] += 1

    alpha = np.zeros(n)
    for k in np.unique(count):
        if k > 0:
            alpha[count == k] = ca_threshold_factor(cfg.pfa, int(k))
    shape = (n,) + (1,) * (x.ndim - 1)
    safe = np.maximum(count, 1).reshape(shape)
    threshold = alpha.reshape(shape) * (total / safe)
    passed = np.where((count > 0).reshape(shape), x > threshold, x > 0)
    return np.moveaxis(passed, 0, axis)


def ca_cfar_1d(values, cfg: CaCfarConfig) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DomainError("ca_cfar_1d needs a non-empty 1-D vector")
    return ca_cfar(v, cfg, axis=0)


def ccfar_step1(t: RadarTensor, cfg: CaCfarConfig) -> RadarTensor:
    """Coarse CA-CFAR along range for every (azimuth, elevation) column.

    Passing cells keep their power; failing cells are zeroed.
    """
    return t.masked(ca_cfar(t.power, cfg, axis=0))


def top_percent_mask(power: np.ndarray, percent: float) -> np.ndarray:
    flat = np.asarray(power, dtype=np.float64).ravel()
    k = quota(percent, flat.size)
    order = np.argsort(-flat, kind="stable")
    keep = np.zeros(flat.size, dtype=bool)
    keep[order[:k]] = True
    return keep.reshape(np.shape(power))


def top_percent_global(t: RadarTensor, cfg: TopPercentConfig | float) -> RadarTensor:
    """Keep the ``ceil(percent/100 * N)`` strongest cells of the whole tensor."""
    percent = cfg.percent if isinstance(cfg, TopPercentConfig) else cfg
    return t.masked(top_percent_mask(t.power, percent))


def os_select_top_k(values, k2_percent: float) -> np.ndarray:
    """Indices (ascending) of the ``ceil(k2/100 * N)`` largest strictly positive entries.

    Zero entries are never selected, even when that leaves the quota unmet.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    k = quota(k2_percent, v.size)
    order = np.argsort(-v, kind="stable")[:k]
    return np.sort(order[v[order] > 0])


def os_select_rows(matrix: np.ndarray, k2_percent: float) -> np.ndarray:
    """Row-wise :func:`os_select_top_k` as a boolean selection matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    k = quota(k2_percent, m.shape[1])
    order = np.argsort(-m, axis=1, kind="stable")[:, :k]
    sel = np.zeros(m.shape, dtype=bool)
    np.put_along_axis(sel, order, True, axis=1)
    return sel & (m > 0)

