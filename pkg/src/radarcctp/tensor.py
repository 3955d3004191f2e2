"""Polar-grid radar tensors, sparse point sets, masks and their binary file formats.

A tensor holds linear-scale power over ``(range, azimuth, elevation)`` cells.
The flat layout is range-major, then azimuth, then elevation, so the linear
offset of ``(i_r, i_a, i_e)`` is ``(i_r * N_a + i_a) * N_e + i_e`` -- exactly
numpy's C order for an array of shape ``(N_r, N_a, N_e)``.

Axis coordinates are bin centres: ``*_start`` is the centre of bin 0 and the
centre of bin ``i`` is ``start + i * step``.  The elevation axis is binned in
height (metres), not in angle.

File formats (all little-endian)::

    RTF1 / RTM1 header, 64 bytes
      0..3    magic b"RTF1" (tensor) or b"RTM1" (mask)
      4..15   u32 x3   N_r, N_a, N_e
      16..63  f64 x6   range_start, range_step, azimuth_start_deg,
                       azimuth_step_deg, elevation_start, elevation_step
    payload
      RTF1    N_r*N_a*N_e f32 powers in layout order
      RTM1    N_r*N_a*N_e bytes, each 0 or 1
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DomainError,
    DuplicateCell,
    GridMismatch,
    IndexOutOfGrid,
    TruncatedFile,
)

TENSOR_MAGIC = b"RTF1"
MASK_MAGIC = b"RTM1"
_HEADER = struct.Struct("<4s3I6d")
HEADER_SIZE = _HEADER.size  # 64

POWER_DTYPE = np.float32


@dataclass(frozen=True)
class PolarGrid:
    n_range: int
    n_azimuth: int
    n_elevation: int
    range_start_m: float = 0.5
    range_step_m: float = 1.0
    azimuth_start_deg: float = 0.0
    azimuth_step_deg: float = 1.0
    elevation_start_m: float = 0.0
    elevation_step_m: float = 1.0

    def __post_init__(self):
        for name in ("n_range", "n_azimuth", "n_elevation"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("range_step_m", "azimuth_step_deg", "elevation_step_m"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("range_start_m", "azimuth_start_deg", "elevation_start_m"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_range, self.n_azimuth, self.n_elevation)

    @property
    def size(self) -> int:
        return self.n_range * self.n_azimuth * self.n_elevation

    @property
    def e_t(self) -> int:
        """Elevation-axis length used by the vertical weighting (``E_T``)."""
        return self.n_elevation

    def range_centers(self) -> np.ndarray:
        return self.range_start_m + self.range_step_m * np.arange(self.n_range)

    def azimuth_centers_deg(self) -> np.ndarray:
        return self.azimuth_start_deg + self.azimuth_step_deg * np.arange(self.n_azimuth)

    def elevation_centers(self) -> np.ndarray:
        return self.elevation_start_m + self.elevation_step_m * np.arange(self.n_elevation)

    def offset(self, c: "CellIndex") -> int:
        self.check(c)
        return (c.i_r * self.n_azimuth + c.i_a) * self.n_elevation + c.i_e

    def contains(self, c) -> bool:
        i_r, i_a, i_e = c
        return (0 <= i_r < self.n_range and 0 <= i_a < self.n_azimuth
                and 0 <= i_e < self.n_elevation)

    def check(self, c) -> None:
        if not self.contains(c):
            raise IndexOutOfGrid(f"cell {tuple(c)} outside grid {self.shape}")

    def header_values(self) -> tuple:
        return (self.n_range, self.n_azimuth, self.n_elevation,
                self.range_start_m, self.range_step_m,
                self.azimuth_start_deg, self.azimuth_step_deg,
                self.elevation_start_m, self.elevation_step_m)


def default_grid() -> PolarGrid:
    """Desk-scale grid: 128 range bins over 0-72 m, 96 azimuth bins over +-45 deg,
    32 height bins over -0.5-4 m."""
    r_step = 72.0 / 128
    a_step = 90.0 / 96
    e_step = 4.5 / 32
    return PolarGrid(128, 96, 32,
                     range_start_m=r_step / 2, range_step_m=r_step,
                     azimuth_start_deg=-45.0 + a_step / 2, azimuth_step_deg=a_step,
                     elevation_start_m=-0.5 + e_step / 2, elevation_step_m=e_step)


class CellIndex(NamedTuple):
    i_r: int
    i_a: int
    i_e: int


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RadarTensor:
    """Dense non-negative power grid.  A value of exactly 0 means "removed"."""

    grid: PolarGrid
    power: np.ndarray

    def __post_init__(self):
        p = np.array(self.power, dtype=POWER_DTYPE, copy=True)
        if p.size != self.grid.size:
            raise DimMismatch(f"power has {p.size} values, grid needs {self.grid.size}")
        p = p.reshape(self.grid.shape)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("power must be finite and non-negative")
        object.__setattr__(self, "power", _frozen(p))

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "RadarTensor":
        return cls(grid, np.zeros(grid.shape, dtype=POWER_DTYPE))

    def __eq__(self, other):
        if not isinstance(other, RadarTensor):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.power, other.power)

    def __repr__(self):
        return f"RadarTensor(shape={self.grid.shape}, nonzero={self.count_nonzero()})"

    def as_float64(self) -> np.ndarray:
        return self.power.astype(np.float64)

    def count_nonzero(self) -> int:
        return int(np.count_nonzero(self.power))

    def nonzero_mask(self) -> "BoolMask":
        return BoolMask(self.grid, self.power > 0)

    def masked(self, keep: np.ndarray) -> "RadarTensor":
        """Copy with cells outside ``keep`` zeroed."""
        return RadarTensor(self.grid, np.where(keep, self.power, 0).astype(POWER_DTYPE))

    def scaled(self, c: float) -> "RadarTensor":
        return RadarTensor(self.grid, self.power * POWER_DTYPE(c))


@dataclass(frozen=True, eq=False)
class BoolMask:
    grid: PolarGrid
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool, copy=True)
        if b.size != self.grid.size:
            raise DimMismatch(f"mask has {b.size} bits, grid needs {self.grid.size}")
        object.__setattr__(self, "bits", _frozen(b.reshape(self.grid.shape)))

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "BoolMask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, BoolMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.bits, other.bits)

    def __or__(self, other: "BoolMask") -> "BoolMask":
        _same_grid(self.grid, other.grid)
        return BoolMask(self.grid, self.bits | other.bits)

    def __and__(self, other: "BoolMask") -> "BoolMask":
        _same_grid(self.grid, other.grid)
        return BoolMask(self.grid, self.bits & other.bits)

    def __invert__(self) -> "BoolMask":
        return BoolMask(self.grid, ~self.bits)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def issubset(self, other: "BoolMask") -> bool:
        _same_grid(self.grid, other.grid)
        return not np.any(self.bits & ~other.bits)


def _same_grid(a: PolarGrid, b: PolarGrid) -> None:
    if a != b:
        raise GridMismatch(f"grids differ: {a.shape} vs {b.shape}")


@dataclass(frozen=True, eq=False)
class SparseMeasurementSet:
    """Point-cloud view: strictly positive cells sorted by ``(i_r, i_a, i_e)``.

    ``indices`` is an ``(M, 3)`` int array and ``powers`` an ``(M,)`` array.
    Construction validates bounds, uniqueness and positivity and sorts the
    entries; it does not silently merge duplicates.
    """

    grid: PolarGrid
    indices: np.ndarray
    powers: np.ndarray = field(default=None)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        pw = np.asarray(self.powers if self.powers is not None else [],
                        dtype=POWER_DTYPE).reshape(-1)
        if len(idx) != len(pw):
            raise DimMismatch(f"{len(idx)} indices but {len(pw)} powers")
        bounds = np.array(self.grid.shape)
        bad = np.any((idx < 0) | (idx >= bounds), axis=1)
        if np.any(bad):
            raise IndexOutOfGrid(f"cell {tuple(int(v) for v in idx[np.argmax(bad)])} "
                                 f"outside grid {self.grid.shape}")
        if np.any(~(pw > 0)) or not np.all(np.isfinite(pw)):
            raise DomainError("sparse powers must be finite and strictly positive")
        flat = (idx[:, 0] * self.grid.n_azimuth + idx[:, 1]) * self.grid.n_elevation + idx[:, 2]
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        if len(flat) > 1 and np.any(flat[1:] == flat[:-1]):
            dup = flat[1:][flat[1:] == flat[:-1]][0]
            raise DuplicateCell(f"duplicate cell {tuple(np.unravel_index(dup, self.grid.shape))}")
        object.__setattr__(self, "indices", _frozen(idx[order]))
        object.__setattr__(self, "powers", _frozen(pw[order]))

    @classmethod
    def from_entries(cls, grid: PolarGrid, entries) -> "SparseMeasurementSet":
        entries = list(entries)
        if not entries:
            return cls(grid, np.empty((0, 3), dtype=np.int64), np.empty(0))
        idx = [tuple(c) for c, _ in entries]
        pw = [p for _, p in entries]
        return cls(grid, idx, pw)

    def __len__(self):
        return len(self.powers)

    def __iter__(self) -> Iterator[tuple[CellIndex, float]]:
        for (i_r, i_a, i_e), p in zip(self.indices.tolist(), self.powers.tolist()):
            yield CellIndex(i_r, i_a, i_e), p

    def __eq__(self, other):
        if not isinstance(other, SparseMeasurementSet):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.powers, other.powers))

    def __repr__(self):
        return f"SparseMeasurementSet(shape={self.grid.shape}, n={len(self)})"


def to_sparse(t: RadarTensor) -> SparseMeasurementSet:
    idx = np.argwhere(t.power > 0)
    return SparseMeasurementSet(t.grid, idx, t.power[tuple(idx.T)])


def from_sparse(s: SparseMeasurementSet) -> RadarTensor:
    power = np.zeros(s.grid.shape, dtype=POWER_DTYPE)
    if len(s):
        power[tuple(s.indices.T)] = s.powers
    return RadarTensor(s.grid, power)


def cell_to_cartesian(grid: PolarGrid, c) -> tuple[float, float, float]:
    """Centre of cell ``c`` as ``(x, y, z)`` metres; x forward, y left, z height."""
    c = CellIndex(*c)
    grid.check(c)
    r = grid.range_start_m + c.i_r * grid.range_step_m
    az = math.radians(grid.azimuth_start_deg + c.i_a * grid.azimuth_step_deg)
    z = grid.elevation_start_m + c.i_e * grid.elevation_step_m
    return r * math.cos(az), r * math.sin(az), z


def sparse_to_points(s: SparseMeasurementSet) -> np.ndarray:
    """``(M, 4)`` array of ``x, y, z, power`` rows."""
    g = s.grid
    if not len(s):
        return np.empty((0, 4))
    r = g.range_start_m + s.indices[:, 0] * g.range_step_m
    az = np.radians(g.azimuth_start_deg + s.indices[:, 1] * g.azimuth_step_deg)
    z = g.elevation_start_m + s.indices[:, 2] * g.elevation_step_m
    return np.column_stack([r * np.cos(az), r * np.sin(az), z, s.powers.astype(np.float64)])


# -- file I/O ---------------------------------------------------------------

def _atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode(magic: bytes, grid: PolarGrid, payload: bytes) -> bytes:
    return _HEADER.pack(magic, *grid.header_values()) + payload


def _decode(data: bytes, magic: bytes, itemsize: int, expect_grid):
    if len(data) < 4 or data[:4] != magic:
        raise BadMagic(f"expected magic {magic!r}, found {data[:4]!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedFile(f"header needs {HEADER_SIZE} bytes, file has {len(data)}")
    _, *values = _HEADER.unpack_from(data)
    try:
        grid = PolarGrid(*values)
    except DomainError as exc:
        raise DimMismatch(f"invalid header: {exc}") from None
    need = HEADER_SIZE + grid.size * itemsize
    if len(data) < need:
        raise TruncatedFile(f"payload needs {need} bytes, file has {len(data)}")
    if len(data) > need:
        raise DimMismatch(f"{len(data) - need} trailing bytes after payload")
    if expect_grid is not None and grid != expect_grid:
        raise DimMismatch(f"file grid {grid.shape} differs from expected {expect_grid.shape}")
    return grid, data[HEADER_SIZE:]


def tensor_to_bytes(t: RadarTensor) -> bytes:
    return _encode(TENSOR_MAGIC, t.grid, t.power.astype("<f4").tobytes())


def tensor_from_bytes(data: bytes, expect_grid: PolarGrid | None = None) -> RadarTensor:
    grid, payload = _decode(data, TENSOR_MAGIC, 4, expect_grid)
    return RadarTensor(grid, np.frombuffer(payload, dtype="<f4"))


def mask_to_bytes(m: BoolMask) -> bytes:
    return _encode(MASK_MAGIC, m.grid, m.bits.astype(np.uint8).tobytes())


def mask_from_bytes(data: bytes, expect_grid: PolarGrid | None = None) -> BoolMask:
    grid, payload = _decode(data, MASK_MAGIC, 1, expect_grid)
    raw = np.frombuffer(payload, dtype=np.uint8)
    if np.any(raw > 1):
        raise DimMismatch("mask payload bytes must be 0 or 1")
    return BoolMask(grid, raw.astype(bool))


def save(t: RadarTensor, path) -> None:
    _atomic_write(path, tensor_to_bytes(t))


def load(path, expect_grid: PolarGrid | None = None) -> RadarTensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read(), expect_grid)


def save_mask(m: BoolMask, path) -> None:
    _atomic_write(path, mask_to_bytes(m))


def load_mask(path, expect_grid: PolarGrid | None = None) -> BoolMask:
    with open(path, "rb") as fh:
        return mask_from_bytes(fh.read(), expect_grid)
