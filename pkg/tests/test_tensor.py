import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tensor, small_grid
from radarcctp.errors import BadMagic, DimMismatch, DomainError, DuplicateCell, IndexOutOfGrid, TruncatedFile
from radarcctp.tensor import (
    HEADER_SIZE,
    BoolMask,
    CellIndex,
    PolarGrid,
    RadarTensor,
    SparseMeasurementSet,
    cell_to_cartesian,
    default_grid,
    from_sparse,
    load,
    load_mask,
    save,
    save_mask,
    sparse_to_points,
    tensor_to_bytes,
    to_sparse,
)


def test_grid_validation():
    with pytest.raises(DomainError):
        PolarGrid(0, 1, 1)
    with pytest.raises(DomainError):
        PolarGrid(1, 1, 1, range_step_m=0.0)
    g = default_grid()
    assert g.shape == (128, 96, 32)
    assert g.e_t == 32
    assert g.range_centers()[0] - g.range_step_m / 2 == pytest.approx(0.0)
    assert g.range_centers()[-1] + g.range_step_m / 2 == pytest.approx(72.0)
    assert g.azimuth_centers_deg()[0] - g.azimuth_step_deg / 2 == pytest.approx(-45.0)
    assert g.elevation_centers()[-1] + g.elevation_step_m / 2 == pytest.approx(4.0)


def test_layout_law(grid):
    p = np.arange(grid.size, dtype=float).reshape(grid.shape)
    t = RadarTensor(grid, p)
    flat = t.power.ravel()
    for i_r, i_a, i_e in [(0, 0, 0), (3, 5, 2), (7, 7, 3), (1, 0, 3)]:
        off = (i_r * grid.n_azimuth + i_a) * grid.n_elevation + i_e
        assert grid.offset(CellIndex(i_r, i_a, i_e)) == off
        assert flat[off] == t.power[i_r, i_a, i_e]


def test_tensor_rejects_negative(grid):
    with pytest.raises(DomainError):
        RadarTensor(grid, -np.ones(grid.shape))
    with pytest.raises(DimMismatch):
        RadarTensor(grid, np.ones(5))


def test_tensor_is_immutable(grid):
    t = RadarTensor.zeros(grid)
    with pytest.raises(ValueError):
        t.power[0, 0, 0] = 1.0


def test_to_sparse_zero_and_singleton():
    g = small_grid(2, 2, 2)
    assert len(to_sparse(RadarTensor.zeros(g))) == 0
    p = np.zeros(g.shape)
    p[0, 1, 0] = 3.5
    s = to_sparse(RadarTensor(g, p))
    assert list(s) == [(CellIndex(0, 1, 0), 3.5)]


def test_to_sparse_matches_naive_scan():
    t = random_tensor(1, (4, 4, 4), kind="sparse")
    expected = []
    for r in range(4):
        for a in range(4):
            for e in range(4):
                v = float(t.power[r, a, e])
                if v > 0:
                    expected.append(((r, a, e), v))
    got = [(tuple(c), p) for c, p in to_sparse(t)]
    assert got == expected


def test_from_sparse_empty_and_errors():
    g = small_grid(2, 2, 2)
    empty = SparseMeasurementSet.from_entries(g, [])
    assert from_sparse(empty) == RadarTensor.zeros(g)
    g4 = small_grid(4, 4, 4)
    with pytest.raises(IndexOutOfGrid):
        SparseMeasurementSet.from_entries(g4, [((5, 0, 0), 1.0)])
    with pytest.raises(DuplicateCell):
        SparseMeasurementSet.from_entries(g4, [((1, 0, 0), 1.0), ((1, 0, 0), 2.0)])
    with pytest.raises(DomainError):
        SparseMeasurementSet.from_entries(g4, [((1, 0, 0), 0.0)])


def test_sparse_entries_sorted():
    g = small_grid(4, 4, 4)
    s = SparseMeasurementSet.from_entries(g, [((3, 0, 0), 1.0), ((0, 2, 1), 2.0), ((0, 2, 0), 3.0)])
    assert [tuple(c) for c, _ in s] == [(0, 2, 0), (0, 2, 1), (3, 0, 0)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 64))
def test_sparse_round_trip(seed, n):
    g = small_grid(4, 4, 4)
    rng = np.random.default_rng(seed)
    cells = rng.choice(g.size, size=min(n, g.size), replace=False)
    entries = [(np.unravel_index(c, g.shape), float(rng.uniform(0.1, 10))) for c in cells]
    s = SparseMeasurementSet.from_entries(g, entries)
    assert to_sparse(from_sparse(s)) == s


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dense_sparse_duality(seed):
    t = random_tensor(seed, (4, 4, 4), kind="sparse")
    assert from_sparse(to_sparse(t)) == t


def test_cell_to_cartesian():
    g = PolarGrid(20, 91, 3, range_start_m=0.5, range_step_m=0.5,
                  azimuth_start_deg=-45.0, azimuth_step_deg=1.0,
                  elevation_start_m=-0.5, elevation_step_m=0.25)
    # range index 19 -> 10 m, azimuth index 45 -> 0 deg
    x, y, z = cell_to_cartesian(g, (19, 45, 2))
    assert (x, y) == (10.0, 0.0)
    assert z == pytest.approx(0.0)
    g90 = PolarGrid(10, 2, 1, range_start_m=1.0, range_step_m=1.0,
                    azimuth_start_deg=0.0, azimuth_step_deg=90.0)
    x, y, _ = cell_to_cartesian(g90, (4, 1, 0))
    assert x == pytest.approx(0.0, abs=1e-9) and y == pytest.approx(5.0, abs=1e-9)
    with pytest.raises(IndexOutOfGrid):
        cell_to_cartesian(g90, (10, 0, 0))


def test_cell_to_cartesian_hand_trig():
    g = default_grid()
    for c in [(17, 3, 5), (100, 80, 30), (0, 0, 0)]:
        r = g.range_start_m + c[0] * g.range_step_m
        az = (g.azimuth_start_deg + c[1] * g.azimuth_step_deg) * math.pi / 180
        z = g.elevation_start_m + c[2] * g.elevation_step_m
        got = cell_to_cartesian(g, c)
        assert got == pytest.approx((r * math.cos(az), r * math.sin(az), z), abs=1e-9)


def test_sparse_to_points_matches_cell_conversion():
    t = random_tensor(4, kind="sparse")
    s = to_sparse(t)
    pts = sparse_to_points(s)
    for (c, p), row in zip(s, pts):
        assert tuple(row[:3]) == pytest.approx(cell_to_cartesian(t.grid, c), abs=1e-12)
        assert row[3] == pytest.approx(p)


def test_save_load_bitwise(tmp_path):
    t = random_tensor(7, (5, 6, 3), kind="exp")
    path = tmp_path / "t.rtf"
    save(t, path)
    back = load(path)
    assert back == t
    assert back.power.tobytes() == t.power.tobytes()
    assert path.stat().st_size == HEADER_SIZE + 4 * t.grid.size


def test_file_header_layout(tmp_path):
    g = small_grid(2, 3, 4)
    data = tensor_to_bytes(RadarTensor.zeros(g))
    assert data[:4] == b"RTF1"
    assert struct.unpack_from("<3I", data, 4) == (2, 3, 4)
    assert struct.unpack_from("<6d", data, 16) == (1.0, 1.0, -10.0, 2.5, -0.5, 0.5)


def test_load_errors(tmp_path):
    t = random_tensor(2, (3, 3, 3))
    path = tmp_path / "t.rtf"
    save(t, path)
    raw = path.read_bytes()
    bad = tmp_path / "bad.rtf"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagic):
        load(bad)
    bad.write_bytes(raw[: HEADER_SIZE + 10])
    with pytest.raises(TruncatedFile):
        load(bad)
    bad.write_bytes(raw[:20])
    with pytest.raises(TruncatedFile):
        load(bad)
    bad.write_bytes(raw + b"\0\0\0\0")
    with pytest.raises(DimMismatch):
        load(bad)
    with pytest.raises(DimMismatch):
        load(path, expect_grid=small_grid(3, 3, 2))


def test_mask_round_trip(tmp_path):
    g = small_grid(3, 4, 5)
    bits = np.random.default_rng(0).random(g.shape) < 0.3
    m = BoolMask(g, bits)
    path = tmp_path / "m.rtm"
    save_mask(m, path)
    assert path.read_bytes()[:4] == b"RTM1"
    assert load_mask(path) == m
    with pytest.raises(BadMagic):
        load(path)
