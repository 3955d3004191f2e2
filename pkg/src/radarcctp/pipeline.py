"""Combined CFAR-based two-level preprocessing (CCTP).

Step 1 removes low-power noise with a coarse CA-CFAR along range (or, for
comparison, a global top-K1% selector).  Step 2 collapses each range slice of
the step-1 output to an azimuth vector with the height weights
``E_T - i_e`` and keeps the top-K2% azimuths per range; the surviving range
set ``J_r`` and azimuth set ``J_a`` define the step-2 output.  Step 3 widens
``J_r`` by ``+-d_r`` and ``J_a`` by ``+-d_a`` and restores step-1 cells inside
the widened sets.  The step-1 output feeds the detector; the step-3 nonzero
pattern is the binary indicator channel.

By default (``pairing="pairwise"``) step 2 keeps exactly the selected
``(range, azimuth)`` locations and step 3 restores every cell within
``+-d_r`` / ``+-d_a`` of one of them.  ``pairing="separable"`` instead uses
the set products ``J_r x J_a`` and ``dilate(J_r) x dilate(J_a)``; on scenes
with residual noise in most ranges ``J_a`` covers nearly every azimuth and
steps 2-3 then remove almost nothing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation

from .cfar import CaCfarConfig, ca_cfar, check_percent, os_select_rows, top_percent_mask
from .errors import DomainError, IndexOutOfGrid
from .tensor import BoolMask, RadarTensor, SparseMeasurementSet, to_sparse

STEP1_MODES = ("ca", "top")
RECOVER_SOURCES = ("m1", "raw")
PAIRINGS = ("separable", "pairwise")


@dataclass(frozen=True)
class CctpConfig:
    """Hyperparameters ``K1-K2-(d_r, d_a)``.

    ``k2_percent=None`` disables steps 2 and 3; ``d_r = d_a = None`` disables
    step 3 only.
    """

    k1_percent: float = 5.0
    k2_percent: float | None = 5.0
    d_r: int | None = 2
    d_a: int | None = 1
    ca: CaCfarConfig = field(default_factory=CaCfarConfig)
    step1_mode: str = "ca"
    recover_from: str = "m1"
    pairing: str = "pairwise"

    def __post_init__(self):
        check_percent(self.k1_percent)
        if self.step1_mode not in STEP1_MODES:
            raise DomainError(f"step1_mode must be one of {STEP1_MODES}")
        if self.step1_mode == "ca":
            if self.k1_percent >= 100:
                raise DomainError("CA-CFAR step 1 needs k1 < 100 (pfa < 1)")
            object.__setattr__(self, "ca", CaCfarConfig(self.ca.train_cells, self.ca.guard_cells,
                                                        self.k1_percent / 100.0))
        if self.recover_from not in RECOVER_SOURCES:
            raise DomainError(f"recover_from must be one of {RECOVER_SOURCES}")
        if self.pairing not in PAIRINGS:
            raise DomainError(f"pairing must be one of {PAIRINGS}")
        if self.k2_percent is not None:
            check_percent(self.k2_percent)
        if (self.d_r is None) != (self.d_a is None):
            raise DomainError("d_r and d_a must be given together")
        if self.d_r is not None:
            if self.k2_percent is None:
                raise DomainError("step 3 requires step 2 (k2_percent)")
            if int(self.d_r) != self.d_r or int(self.d_a) != self.d_a:
                raise DomainError("d_r and d_a must be integers")
            if not (self.d_r >= self.d_a >= 1):
                raise DomainError(f"need d_r >= d_a >= 1, got d_r={self.d_r}, d_a={self.d_a}")

    @property
    def has_step2(self) -> bool:
        return self.k2_percent is not None

    @property
    def has_step3(self) -> bool:
        return self.d_r is not None

    def step1_only(self) -> "CctpConfig":
        return _replace(self, k2_percent=None, d_r=None, d_a=None)

    def step2_only(self) -> "CctpConfig":
        return _replace(self, d_r=None, d_a=None)


def _replace(cfg: CctpConfig, **changes) -> CctpConfig:
    return dataclasses.replace(cfg, **changes)


def _num(x: float) -> str:
    return f"{x:g}"


def config_label(cfg: CctpConfig) -> str:
    """``K1-K2-(dr,da)`` legend text, ``Nan`` for disabled stages.

    The global top-K1% step-1 variant is prefixed with ``top``.
    """
    k1 = ("top" if cfg.step1_mode == "top" else "") + _num(cfg.k1_percent)
    k2 = _num(cfg.k2_percent) if cfg.has_step2 else "Nan"
    d = f"({cfg.d_r},{cfg.d_a})" if cfg.has_step3 else "Nan"
    return f"{k1}-{k2}-{d}"


# -- steps -------------------------------------------------------------------

def vertical_weights(n_elevation: int) -> np.ndarray:
    """``W_V[i_e] = E_T - i_e``; the lowest height bin gets the largest weight."""
    return (n_elevation - np.arange(n_elevation)).astype(np.float64)


def _project(power: np.ndarray) -> np.ndarray:
    # explicit ascending-elevation accumulation keeps the sum order fixed
    p = np.asarray(power, dtype=np.float64)
    e_t = p.shape[-1]
    out = np.zeros(p.shape[:-1])
    for i_e in range(e_t):
        out += (e_t - i_e) * p[..., i_e]
    return out


def vertical_weighted_projection(m1: RadarTensor, i_r: int) -> np.ndarray:
    """Height-weighted azimuth profile of range slice ``i_r`` (length ``N_a``)."""
    if not (0 <= i_r < m1.grid.n_range):
        raise IndexOutOfGrid(f"range index {i_r} outside 0..{m1.grid.n_range - 1}")
    return _project(m1.power[i_r])


def vertical_projection(m1: RadarTensor) -> np.ndarray:
    """All range slices at once: ``(N_r, N_a)``."""
    return _project(m1.power)


@dataclass(frozen=True, eq=False)
class Step2Result:
    m2: RadarTensor
    j_r: np.ndarray
    j_a: np.ndarray
    selections: np.ndarray  # (N_r, N_a) bool, per-range picks

    def survivor_pairs(self) -> list[tuple[int, int]]:
        return [tuple(p) for p in np.argwhere(self.selections).tolist()]

    def __iter__(self):
        return iter((self.m2, self.j_r, self.j_a, self.selections))


def cctp_step1(raw: RadarTensor, cfg: CctpConfig) -> RadarTensor:
    if cfg.step1_mode == "top":
        return raw.masked(top_percent_mask(raw.power, cfg.k1_percent))
    return raw.masked(ca_cfar(raw.power, cfg.ca, axis=0))


def cctp_step2(m1: RadarTensor, k2_percent: float, pairing: str = "pairwise") -> Step2Result:
    if pairing not in PAIRINGS:
        raise DomainError(f"pairing must be one of {PAIRINGS}")
    sel = os_select_rows(vertical_projection(m1), k2_percent)
    j_r = np.flatnonzero(sel.any(axis=1))
    j_a = np.flatnonzero(sel.any(axis=0))
    if pairing == "separable":
        keep2d = np.zeros(sel.shape, dtype=bool)
        keep2d[np.ix_(j_r, j_a)] = True
    else:
        keep2d = sel
    return Step2Result(m1.masked(keep2d[:, :, None]), j_r, j_a, sel)


def _dilate_1d(idx, n: int, d: int) -> np.ndarray:
    out = np.zeros(n, dtype=bool)
    for j in np.asarray(idx, dtype=np.int64):
        out[max(0, j - d):min(n, j + d + 1)] = True
    return out


def recovery_footprint(shape2d, j_r, j_a, d_r: int, d_a: int,
                       selections: np.ndarray | None = None) -> np.ndarray:
    """Boolean ``(N_r, N_a)`` map of cells restored by step 3 (borders clamped)."""
    n_r, n_a = shape2d
    if selections is not None:
        if not selections.any():
            return np.zeros(shape2d, dtype=bool)
        box = np.ones((2 * d_r + 1, 2 * d_a + 1), dtype=bool)
        return binary_dilation(selections, structure=box)
    return _dilate_1d(j_r, n_r, d_r)[:, None] & _dilate_1d(j_a, n_a, d_a)[None, :]


def cctp_step3(source: RadarTensor, j_r, j_a, d_r: int, d_a: int,
               selections: np.ndarray | None = None) -> RadarTensor:
    """Restore ``source`` cells whose range lies within ``d_r`` of some ``J_r``
    member and whose azimuth lies within ``d_a`` of some ``J_a`` member."""
    if not (d_r >= d_a >= 1):
        raise DomainError(f"need d_r >= d_a >= 1, got d_r={d_r}, d_a={d_a}")
    g = source.grid
    keep = recovery_footprint((g.n_range, g.n_azimuth), j_r, j_a, d_r, d_a, selections)
    return source.masked(keep[:, :, None])


# -- composition -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CctpOutput:
    config: CctpConfig
    step1: RadarTensor
    step2: RadarTensor | None
    step3: RadarTensor | None
    preserved_ranges: np.ndarray
    preserved_azimuths: np.ndarray
    selections: np.ndarray | None

    @property
    def final(self) -> RadarTensor:
        """Output of the last enabled step."""
        for t in (self.step3, self.step2, self.step1):
            if t is not None:
                return t
        raise AssertionError("unreachable")

    @property
    def m1(self) -> SparseMeasurementSet:
        return to_sparse(self.step1)

    @property
    def m3(self) -> SparseMeasurementSet:
        return to_sparse(self.final)

    @property
    def indicator(self) -> BoolMask:
        return self.final.nonzero_mask()

    def nesting_ok(self) -> bool:
        """``nonzero(m2) <= nonzero(m3) <= nonzero(m1)`` for the enabled steps."""
        outer = self.step1.power > 0
        for t in (self.step3, self.step2):
            if t is None:
                continue
            inner = t.power > 0
            if np.any(inner & ~outer):
                return False
            outer = inner
        return True


def run_cctp(raw: RadarTensor, cfg: CctpConfig | None = None) -> CctpOutput:
    cfg = cfg or CctpConfig()
    m1 = cctp_step1(raw, cfg)
    empty = np.empty(0, dtype=np.int64)
    if not cfg.has_step2:
        return CctpOutput(cfg, m1, None, None, empty, empty, None)
    s2 = cctp_step2(m1, cfg.k2_percent, cfg.pairing)
    m3 = None
    if cfg.has_step3:
        source = m1 if cfg.recover_from == "m1" else raw
        sel = s2.selections if cfg.pairing == "pairwise" else None
        m3 = cctp_step3(source, s2.j_r, s2.j_a, cfg.d_r, cfg.d_a, sel)
    return CctpOutput(cfg, m1, s2.m2, m3, s2.j_r, s2.j_a, s2.selections)
