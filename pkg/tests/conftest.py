import numpy as np
import pytest

from gplhy.bounds import AnsatzParams, gaussian_ansatz
from gplhy.grid import GridSpec, sample
from gplhy.kernel import KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def dipolar():
    return KernelSpec.dipolar()


def gaussian_field(lam, sr, sz, n=64, box_factor=8.0):
    g = GridSpec((n, n, n), (box_factor * sr, box_factor * sr, box_factor * sz))
    return sample(g, gaussian_ansatz(lam, AnsatzParams(sr, sz)))


def smooth_random_field(grid, rng, width=None, complex_=False):
    """Random field with a Gaussian envelope and smooth bumps, decaying at the box faces."""
    x, y, z = grid.coords()
    L = min(grid.L)
    w = L / 8 if width is None else width
    env = np.exp(-(x * x + y * y + z * z) / (2 * w * w))
    vals = env.copy()
    for _ in range(3):
        c = rng.uniform(-L / 8, L / 8, size=3)
        a = rng.uniform(0.2, 0.6)
        s = rng.uniform(0.6, 1.2) * w
        vals = vals + a * np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * s * s))
    if complex_:
        phase = rng.uniform(0, 2 * np.pi)
        vals = vals * np.exp(1j * (phase + 0.3 * x / w))
    return vals


@pytest.fixture(scope="session")
def droplet_b5():
    """Converged self-bound state at b = 5, twice the ansatz threshold (a few seconds)."""
    from gplhy.bounds import upper_bound
    from gplhy.minimize import MinimizeOptions, auto_grid, minimize
    from gplhy.params import ReducedParams

    b = 5.0
    lam = 2 * upper_bound(b)[0]
    grid = auto_grid(lam, b, n=(48, 48, 64), radial_factor=16.0)
    res = minimize(ReducedParams(b=b, lam=lam), grid, KernelSpec.dipolar(), MinimizeOptions(tol=1e-6))
    assert res.converged
    return res


# one summary line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
