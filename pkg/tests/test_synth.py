import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import minimize_scalar

from radarcctp.errors import IndexOutOfGrid, SpecParseError
from radarcctp.synth import (
    ClutterPatch,
    SceneSpec,
    TargetSpec,
    demo_scene_spec,
    first_sidelobe_offset,
    format_scene_spec,
    generate_noise,
    generate_scene,
    inject_target,
    load_scene,
    parse_scene_spec,
    target_pattern,
)
from radarcctp.tensor import PolarGrid, RadarTensor, default_grid


@pytest.fixture(scope="module")
def noise():
    return generate_noise(default_grid(), 2.0, 99)


def test_noise_mean(noise):
    assert abs(noise.as_float64().mean() / 2.0 - 1) < 0.01


def test_noise_strictly_positive(noise):
    assert noise.power.min() > 0


def test_noise_deterministic(noise):
    again = generate_noise(default_grid(), 2.0, 99)
    assert again.power.tobytes() == noise.power.tobytes()
    other = generate_noise(default_grid(), 2.0, 100)
    assert other.power.tobytes() != noise.power.tobytes()


def test_noise_tail(noise):
    n = noise.grid.size
    frac = (noise.as_float64() > 2.0 * math.log(100)).mean()
    assert abs(frac - 0.01) <= 4 * math.sqrt(0.01 * 0.99 / n)


def test_noise_ks(noise):
    x = noise.as_float64().ravel()[:200_000]
    d = stats.kstest(x, "expon", args=(0, 2.0)).statistic
    # asymptotic 1% critical value
    assert d < 1.628 / math.sqrt(x.size)


def _line_grid(n=16):
    return PolarGrid(n, 9, 5, range_start_m=1.0, range_step_m=1.0,
                     azimuth_start_deg=-4.0, azimuth_step_deg=1.0)


def test_inverse_fourth_power_ratio():
    g = _line_grid()
    near, _ = target_pattern(g, TargetSpec((4, 4, 2), peak_snr_db=20))
    far, _ = target_pattern(g, TargetSpec((9, 4, 2), peak_snr_db=20))
    # bin 4 sits at 5 m, bin 9 at 10 m
    assert near[4, 4, 2] / far[9, 4, 2] == pytest.approx(16.0, rel=1e-9)


def test_r4_constant_across_range():
    g = _line_grid()
    vals = []
    for i in range(1, 16):
        added, _ = target_pattern(g, TargetSpec((i, 4, 2), peak_snr_db=10))
        r = g.range_start_m + i * g.range_step_m
        vals.append(added[i, 4, 2] * r**4)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-9)


def _closed_form(grid, spec, noise_mean):
    """Independent cell-by-cell evaluator of the target pattern."""
    res = minimize_scalar(lambda u: -np.sinc(u) ** 2, bounds=(1.05, 1.95), method="bounded",
                          options={"xatol": 1e-12})
    natural_first = float(np.sinc(res.x) ** 2)
    c, (dr, da, de) = spec.center, spec.extent
    r = grid.range_start_m + c[0] * grid.range_step_m
    peak = noise_mean * 10 ** (spec.peak_snr_db / 10) * (spec.reference_range_m / r) ** 4
    out = np.zeros(grid.shape)
    for i in range(grid.n_range):
        for j in range(grid.n_azimuth):
            for k in range(grid.n_elevation):
                di, dj, dk = abs(i - c[0]), j - c[1], abs(k - c[2])
                if di > dr or dk > de:
                    continue
                u = dj / (da + 1)
                gain = (math.sin(math.pi * u) / (math.pi * u)) ** 2 if u else 1.0
                if abs(u) >= 1:
                    gain *= 10 ** (-spec.sidelobe_level_db / 10) / natural_first
                out[i, j, k] = peak * (1 - di / (dr + 1)) * gain * (1 - dk / (de + 1))
    return out


@pytest.mark.parametrize("extent", [(0, 0, 0), (2, 1, 1), (1, 3, 2)])
def test_pattern_matches_closed_form(extent):
    g = _line_grid(12)
    spec = TargetSpec((6, 4, 2), extent, peak_snr_db=25, sidelobe_level_db=17.0)
    added, mask = target_pattern(g, spec, 1.5)
    np.testing.assert_allclose(added, _closed_form(g, spec, 1.5), rtol=1e-9, atol=1e-12)
    assert mask.sum() == np.prod([min(2 * e + 1, n) for e, n in zip(extent, g.shape)])


def test_first_sidelobe_level():
    u = first_sidelobe_offset()
    assert math.tan(math.pi * u) == pytest.approx(math.pi * u, rel=1e-9)
    # at the sidelobe peak the gain is exactly the configured level
    g = _line_grid()
    spec = TargetSpec((5, 4, 2), (0, 1, 0), sidelobe_level_db=13.3)
    h = spec.extent[1] + 1
    from radarcctp.synth import azimuth_gain
    assert 10 * math.log10(azimuth_gain(np.array([u * h]), 1, 13.3)[0]) == pytest.approx(-13.3)
    added, mask = target_pattern(g, spec)
    # the main-lobe null falls on the first cell outside the extent
    assert added[5, 4 + 2, 2] < 1e-20 * added[5, 4, 2] and not mask[5, 6, 2]
    assert added[5, 7, 2] > 1e-3 * added[5, 4, 2] and not mask[5, 7, 2]


def test_zero_extent_marks_one_cell():
    g = _line_grid()
    t, m = inject_target(generate_noise(g, 1.0, 0), TargetSpec((3, 3, 3)))
    assert m.count() == 1 and m.bits[3, 3, 3]
    # with an azimuth half-width of 1, sidelobe power lands outside the mask
    base = generate_noise(g, 1.0, 0)
    t, m = inject_target(base, TargetSpec((3, 4, 3), (0, 1, 0), peak_snr_db=40))
    grew = t.power > base.power
    assert (grew & ~m.bits).any()


def test_inject_out_of_grid():
    g = _line_grid()
    with pytest.raises(IndexOutOfGrid):
        inject_target(RadarTensor.zeros(g), TargetSpec((16, 0, 0)))


def test_empty_scene():
    g = _line_grid()
    s = generate_scene(SceneSpec(grid=g, seed=1))
    assert s.valid_mask.count() == 0 and s.tensor.power.min() > 0


def test_disjoint_targets_union():
    g = _line_grid(20)
    a = TargetSpec((4, 2, 2), (1, 1, 1))
    b = TargetSpec((14, 6, 2), (2, 1, 0))
    s = generate_scene(SceneSpec(grid=g, targets=(a, b), seed=3))
    assert s.valid_mask.count() == 27 + 15
    union = s.per_target_masks[0] | s.per_target_masks[1]
    assert union == s.valid_mask


def test_clutter_not_valid_and_raises_power():
    g = _line_grid(20)
    patch = ClutterPatch((10, 4, 2), (2, 2, 1), 50.0)
    s = generate_scene(SceneSpec(grid=g, clutter_patches=(patch,), seed=5))
    assert s.valid_mask.count() == 0
    box = s.tensor.as_float64()[8:13, 2:7, 1:4]
    assert box.mean() > 10


def test_scene_deterministic(tmp_path):
    spec = demo_scene_spec(4, seed=8, grid=_line_grid(40), n_clutter=1)
    a, b = generate_scene(spec), generate_scene(spec)
    assert a == b
    a.save(str(tmp_path / "x_"))
    t, m = load_scene(str(tmp_path / "x_"))
    assert t == a.tensor and m == a.valid_mask


def test_demo_scene_targets_disjoint():
    spec = demo_scene_spec()
    assert len(spec.targets) == 10
    s = generate_scene(spec)
    assert sum(m.count() for m in s.per_target_masks) == s.valid_mask.count()


def test_out_of_grid_names_target():
    g = _line_grid()
    with pytest.raises(IndexOutOfGrid, match="target 1"):
        generate_scene(SceneSpec(grid=g, targets=(TargetSpec((1, 1, 1)), TargetSpec((99, 0, 0)))))


SPEC_TEXT = """
# tiny scene
n_range = 16
n_azimuth = 9
n_elevation = 5
range_start_m = 1
range_step_m = 1
seed = 42

[target]
center = 5, 4, 2
extent = 1, 1, 0
peak_snr_db = 30

[clutter]
center = 10, 2, 1
extent = 1, 1, 1
mean_power = 8
"""


def test_spec_parse_and_format_round_trip():
    spec = parse_scene_spec(SPEC_TEXT)
    assert spec.grid.shape == (16, 9, 5) and spec.seed == 42
    assert spec.targets[0].center == (5, 4, 2) and spec.targets[0].extent == (1, 1, 0)
    assert spec.clutter_patches[0].mean_power == 8.0
    assert parse_scene_spec(format_scene_spec(spec)) == spec


@pytest.mark.parametrize("text,line", [
    ("n_range = 4\nbogus = 1\n", 2),
    ("[target]\ncenter = 1, 2\n", 2),
    ("seed = 1\n[what]\n", 2),
    ("[target]\nextent = 1, 1, 1\n", 1),
    ("n_range = 4\nn_range = 5\n", 2),
    ("no equals sign\n", 1),
])
def test_spec_errors_carry_line(text, line):
    with pytest.raises(SpecParseError, match=f"line {line}:"):
        parse_scene_spec(text)
