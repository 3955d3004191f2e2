import numpy as np
import pytest

from radarcctp.tensor import PolarGrid, RadarTensor


def small_grid(n_r=8, n_a=8, n_e=4):
    return PolarGrid(n_r, n_a, n_e, range_start_m=1.0, range_step_m=1.0,
                     azimuth_start_deg=-10.0, azimuth_step_deg=2.5,
                     elevation_start_m=-0.5, elevation_step_m=0.5)


def random_tensor(seed, shape=(8, 8, 4), kind=None):
    """Random non-negative tensor; ``kind`` picks continuous, sparse or tied values."""
    rng = np.random.default_rng(seed)
    kind = kind or ("exp", "sparse", "ints")[seed % 3]
    if kind == "exp":
        p = rng.exponential(1.0, shape)
    elif kind == "sparse":
        p = rng.exponential(1.0, shape) * (rng.random(shape) < 0.4)
    else:
        p = rng.integers(0, 4, shape).astype(float)
    return RadarTensor(small_grid(*shape), p)


@pytest.fixture
def grid():
    return small_grid()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict, echoed in the terminal summary."""
    def record(name, ok, detail=""):
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
        print(_ACCEPTANCE[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
