"""Seeded synthetic radar scenes with known valid/invalid cell ground truth.

Noise is the power of circular complex Gaussian samples, i.e. i.i.d.
exponential with the requested mean.  Targets add a deterministic pattern:

* peak ``P0 * (r_ref / r)**4`` at the centre cell, where ``P0`` is the noise
  mean raised by ``peak_snr_db`` and ``r`` the centre bin's range;
* squared-sinc azimuth response whose main lobe spans the extent and whose
  first sidelobe sits ``sidelobe_level_db`` below the peak, applied over the
  whole azimuth axis;
* linear taper in range and height that reaches ``1/(d+1)`` at the extent edge.

Only cells inside the extent box are marked valid.  Sidelobe energy outside
it is injected but counts as invalid, as do clutter patches (locally elevated
exponential noise).

Scene-spec text grammar (``#`` starts a comment, blank lines ignored)::

    spec     = { assign } { section }
    section  = ( "[target]" | "[clutter]" ) { assign }
    assign   = key "=" value
    value    = number | number "," number "," number

Top-level keys: the ``PolarGrid`` field names (defaults from
``default_grid()``), ``noise_mean_power`` and ``seed``.  ``[target]`` keys:
``center``, ``extent``, ``peak_snr_db``, ``sidelobe_level_db``,
``reference_range_m``.  ``[clutter]`` keys: ``center``, ``extent``,
``mean_power``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, IndexOutOfGrid, SpecParseError
from .tensor import (
    POWER_DTYPE,
    BoolMask,
    CellIndex,
    PolarGrid,
    RadarTensor,
    default_grid,
    load,
    load_mask,
    save,
    save_mask,
)

# smallest positive float32; keeps noise strictly positive after the cast
_TINY = np.finfo(POWER_DTYPE).smallest_subnormal


@dataclass(frozen=True)
class TargetSpec:
    center: CellIndex
    extent: tuple[int, int, int] = (0, 0, 0)
    peak_snr_db: float = 30.0
    sidelobe_level_db: float = 13.3
    reference_range_m: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "center", CellIndex(*(int(v) for v in self.center)))
        ext = tuple(int(v) for v in self.extent)
        if len(ext) != 3 or min(ext) < 0:
            raise DomainError(f"extent must be three half-widths >= 0, got {self.extent!r}")
        object.__setattr__(self, "extent", ext)
        if not math.isfinite(self.peak_snr_db):
            raise DomainError("peak_snr_db must be finite")
        if not (self.reference_range_m > 0):
            raise DomainError("reference_range_m must be > 0")


@dataclass(frozen=True)
class ClutterPatch:
    center: CellIndex
    extent: tuple[int, int, int]
    mean_power: float

    def __post_init__(self):
        object.__setattr__(self, "center", CellIndex(*(int(v) for v in self.center)))
        ext = tuple(int(v) for v in self.extent)
        if len(ext) != 3 or min(ext) < 0:
            raise DomainError(f"extent must be three half-widths >= 0, got {self.extent!r}")
        object.__setattr__(self, "extent", ext)
        if not (self.mean_power > 0):
            raise DomainError("clutter mean_power must be > 0")


@dataclass(frozen=True)
class SceneSpec:
    grid: PolarGrid = field(default_factory=default_grid)
    noise_mean_power: float = 1.0
    targets: tuple[TargetSpec, ...] = ()
    clutter_patches: tuple[ClutterPatch, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not (self.noise_mean_power > 0):
            raise DomainError("noise_mean_power must be > 0")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "clutter_patches", tuple(self.clutter_patches))


@dataclass(frozen=True, eq=False)
class Scene:
    tensor: RadarTensor
    valid_mask: BoolMask
    per_target_masks: tuple[BoolMask, ...]

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (self.tensor == other.tensor and self.valid_mask == other.valid_mask
                and self.per_target_masks == other.per_target_masks)

    def save(self, prefix) -> tuple[str, str]:
        tpath, mpath = f"{prefix}scene.rtf", f"{prefix}valid.rtm"
        save(self.tensor, tpath)
        save_mask(self.valid_mask, mpath)
        return tpath, mpath


def load_scene(prefix) -> tuple[RadarTensor, BoolMask]:
    """Read the ``scene.rtf`` / ``valid.rtm`` pair written by :meth:`Scene.save`."""
    t = load(f"{prefix}scene.rtf")
    return t, load_mask(f"{prefix}valid.rtm", expect_grid=t.grid)


def generate_noise(grid: PolarGrid, mean_power: float, seed) -> RadarTensor:
    if not (mean_power > 0):
        raise DomainError("mean_power must be > 0")
    rng = np.random.default_rng(seed)
    return RadarTensor(grid, _exp_noise(rng, mean_power, grid.shape))


def _exp_noise(rng, mean, shape):
    x = rng.exponential(mean, size=shape).astype(POWER_DTYPE)
    return np.maximum(x, _TINY)


@functools.lru_cache(maxsize=None)
def first_sidelobe_offset() -> float:
    """Normalised offset of the first sidelobe peak of sinc^2 (root of tan(pi u) = pi u)."""
    return brentq(lambda u: math.tan(math.pi * u) - math.pi * u, 1.01, 1.49, xtol=1e-15)


def azimuth_gain(delta: np.ndarray, half_width: int, sidelobe_level_db: float) -> np.ndarray:
    """Squared-sinc azimuth response; nulls at ``+-(half_width + 1)`` cells."""
    u = np.asarray(delta, dtype=np.float64) / (half_width + 1)
    g = np.sinc(u) ** 2
    natural = np.sinc(first_sidelobe_offset()) ** 2
    side = 10.0 ** (-sidelobe_level_db / 10.0) / natural
    return np.where(np.abs(u) < 1, g, g * side)


def target_pattern(grid: PolarGrid, spec: TargetSpec, noise_mean_power: float = 1.0):
    """Added-power array (float64, full grid) and the extent mask for one target."""
    grid.check(spec.center)
    c, (dr, da, de) = spec.center, spec.extent
    r = grid.range_start_m + c.i_r * grid.range_step_m
    if r <= 0:
        raise DomainError(f"target centre range {r} m must be > 0 for the r^-4 law")
    peak = noise_mean_power * 10.0 ** (spec.peak_snr_db / 10.0) * (spec.reference_range_m / r) ** 4

    ir = np.arange(grid.n_range) - c.i_r
    ia = np.arange(grid.n_azimuth) - c.i_a
    ie = np.arange(grid.n_elevation) - c.i_e
    w_r = np.where(np.abs(ir) <= dr, 1.0 - np.abs(ir) / (dr + 1), 0.0)
    w_e = np.where(np.abs(ie) <= de, 1.0 - np.abs(ie) / (de + 1), 0.0)
    w_a = azimuth_gain(ia, da, spec.sidelobe_level_db)
    added = peak * w_r[:, None, None] * w_a[None, :, None] * w_e[None, None, :]

    in_a = np.abs(ia) <= da
    mask = (np.abs(ir) <= dr)[:, None, None] & in_a[None, :, None] & (np.abs(ie) <= de)[None, None, :]
    return added, mask


def inject_target(t: RadarTensor, spec: TargetSpec, noise_mean_power: float = 1.0):
    added, mask = target_pattern(t.grid, spec, noise_mean_power)
    out = (t.as_float64() + added).astype(POWER_DTYPE)
    return RadarTensor(t.grid, out), BoolMask(t.grid, mask)


def _box(grid: PolarGrid, center, extent):
    return tuple(slice(max(0, c - d), min(n, c + d + 1))
                 for c, d, n in zip(center, extent, grid.shape))


def generate_scene(spec: SceneSpec) -> Scene:
    grid = spec.grid
    for k, tgt in enumerate(spec.targets):
        if not grid.contains(tgt.center):
            raise IndexOutOfGrid(f"target {k}: centre {tuple(tgt.center)} outside grid {grid.shape}")
    for k, patch in enumerate(spec.clutter_patches):
        if not grid.contains(patch.center):
            raise IndexOutOfGrid(f"clutter patch {k}: centre {tuple(patch.center)} "
                                 f"outside grid {grid.shape}")

    rng = np.random.default_rng(spec.seed)
    power = _exp_noise(rng, spec.noise_mean_power, grid.shape).astype(np.float64)
    for patch in spec.clutter_patches:
        box = _box(grid, patch.center, patch.extent)
        shape = tuple(s.stop - s.start for s in box)
        power[box] = _exp_noise(rng, patch.mean_power, shape)

    masks = []
    for tgt in spec.targets:
        added, m = target_pattern(grid, tgt, spec.noise_mean_power)
        power += added
        masks.append(BoolMask(grid, m))

    valid = np.zeros(grid.shape, dtype=bool)
    for m in masks:
        valid |= m.bits
    tensor = RadarTensor(grid, np.maximum(power.astype(POWER_DTYPE), _TINY))
    return Scene(tensor, BoolMask(grid, valid), tuple(masks))


def demo_scene_spec(n_targets: int = 10, seed: int = 2023, grid: PolarGrid | None = None,
                    n_clutter: int = 3) -> SceneSpec:
    """Road-like scene: targets spread over the RoI at low height, plus clutter.

    Placements are drawn from ``seed`` and kept pairwise disjoint, including a
    one-cell margin, so per-target masks never overlap.
    """
    grid = grid or default_grid()
    rng = np.random.default_rng(seed)
    targets: list[TargetSpec] = []
    occupied = np.zeros(grid.shape, dtype=bool)
    ground = int(np.clip(np.searchsorted(grid.elevation_centers(), 0.0), 0, grid.n_elevation - 1))
    attempts = 0
    while len(targets) < n_targets:
        attempts += 1
        if attempts > 10_000:
            raise DomainError(f"could not place {n_targets} disjoint targets on {grid.shape}")
        ext = (int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(2, 6)))
        lo_r = max(ext[0], 4)
        if lo_r >= grid.n_range - ext[0]:
            raise DomainError("grid too short in range for demo targets")
        c = (int(rng.integers(lo_r, grid.n_range - ext[0])),
             int(rng.integers(ext[1], grid.n_azimuth - ext[1])),
             min(grid.n_elevation - 1, ground + ext[2] + int(rng.integers(0, 3))))
        box = _box(grid, c, tuple(e + 1 for e in ext))
        if occupied[box].any():
            continue
        occupied[box] = True
        targets.append(TargetSpec(c, ext, peak_snr_db=float(rng.uniform(42.0, 52.0))))
    patches = []
    for _ in range(n_clutter):
        c = (int(rng.integers(0, grid.n_range)), int(rng.integers(0, grid.n_azimuth)),
             int(rng.integers(0, max(1, grid.n_elevation // 4))))
        patches.append(ClutterPatch(c, (3, 4, 2), 10.0))
    return SceneSpec(grid=grid, noise_mean_power=1.0, targets=tuple(targets),
                     clutter_patches=tuple(patches), seed=seed)


# -- scene-spec text format -------------------------------------------------

_GRID_KEYS = {f.name for f in dataclasses.fields(PolarGrid)}
_INT_GRID_KEYS = {"n_range", "n_azimuth", "n_elevation"}
_TOP_KEYS = _GRID_KEYS | {"noise_mean_power", "seed"}
_SECTION_KEYS = {
    "target": {"center", "extent", "peak_snr_db", "sidelobe_level_db", "reference_range_m"},
    "clutter": {"center", "extent", "mean_power"},
}
_TRIPLE_KEYS = {"center", "extent"}


def _parse_value(key, raw, lineno):
    try:
        if key in _TRIPLE_KEYS:
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError
            return tuple(int(p) for p in parts)
        if key in _INT_GRID_KEYS or key == "seed":
            return int(raw)
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError
        return value
    except ValueError:
        raise SpecParseError(f"bad value for {key!r}: {raw!r}", lineno) from None


def parse_scene_spec(text: str) -> SceneSpec:
    top: dict = {}
    sections: list[tuple[str, int, dict]] = []
    current = top
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip().lower()
            if not line.endswith("]") or name not in _SECTION_KEYS:
                raise SpecParseError(f"unknown section {line!r}", lineno)
            current = {}
            sections.append((name, lineno, current))
            continue
        if "=" not in line:
            raise SpecParseError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        allowed = _TOP_KEYS if current is top else _SECTION_KEYS[sections[-1][0]]
        if key not in allowed:
            raise SpecParseError(f"unknown key {key!r}", lineno)
        if key in current:
            raise SpecParseError(f"duplicate key {key!r}", lineno)
        current[key] = (_parse_value(key, raw, lineno), lineno)

    base = dataclasses.asdict(default_grid())
    base.update({k: v for k, (v, _) in top.items() if k in _GRID_KEYS})
    try:
        grid = PolarGrid(**base)
    except DomainError as exc:
        raise SpecParseError(f"invalid grid: {exc}") from None

    targets, patches = [], []
    for name, lineno, body in sections:
        if "center" not in body:
            raise SpecParseError(f"[{name}] section needs 'center'", lineno)
        kwargs = {k: v for k, (v, _) in body.items()}
        try:
            if name == "target":
                targets.append(TargetSpec(**kwargs))
            else:
                if "extent" not in kwargs or "mean_power" not in kwargs:
                    raise SpecParseError("[clutter] needs 'extent' and 'mean_power'", lineno)
                patches.append(ClutterPatch(**kwargs))
        except DomainError as exc:
            raise SpecParseError(str(exc), lineno) from None
    try:
        return SceneSpec(grid=grid,
                         noise_mean_power=top.get("noise_mean_power", (1.0, 0))[0],
                         targets=tuple(targets), clutter_patches=tuple(patches),
                         seed=top.get("seed", (0, 0))[0])
    except DomainError as exc:
        raise SpecParseError(str(exc)) from None


def load_scene_spec(path) -> SceneSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scene_spec(fh.read())


def format_scene_spec(spec: SceneSpec) -> str:
    """Render ``spec`` in the text grammar; ``parse_scene_spec`` inverts it."""
    lines = [f"{k} = {v!r}" for k, v in dataclasses.asdict(spec.grid).items()]
    lines += [f"noise_mean_power = {spec.noise_mean_power!r}", f"seed = {spec.seed}"]
    trip = lambda v: ", ".join(str(int(x)) for x in v)  # noqa: E731
    for t in spec.targets:
        lines += ["", "[target]", f"center = {trip(t.center)}", f"extent = {trip(t.extent)}",
                  f"peak_snr_db = {t.peak_snr_db!r}", f"sidelobe_level_db = {t.sidelobe_level_db!r}",
                  f"reference_range_m = {t.reference_range_m!r}"]
    for p in spec.clutter_patches:
        lines += ["", "[clutter]", f"center = {trip(p.center)}", f"extent = {trip(p.extent)}",
                  f"mean_power = {p.mean_power!r}"]
    return "\n".join(lines) + "\n"
