import math

import numpy as np
import pytest

from infonet.grid import GridSpec
from infonet.sensors import BearingSensor, FovSensor, build_table


@pytest.fixture(scope="session")
def grid8():
    return GridSpec(n=8)


@pytest.fixture(scope="session")
def grid4():
    return GridSpec(n=4)


@pytest.fixture(scope="session")
def bearing8(grid8):
    s = BearingSensor()
    return s, build_table(s, grid8)


@pytest.fixture(scope="session")
def fov6():
    g = GridSpec(n=6, heading_bins=8)
    s = FovSensor()
    return g, s, build_table(s, g)


def random_belief(rng, n, sparsity=0.0):
    b = rng.random((n, n)) ** 3
    if sparsity:
        b[rng.random((n, n)) < sparsity] = 0.0
        if b.sum() == 0:
            b[0, 0] = 1.0
    return b / b.sum()


# Reference measurement models written straight from the definitions with
# the math module, independent of the kernels under test.  Offsets below
# COINCIDENT meters count as coincident, matching the package convention.
COINCIDENT = 1e-9

def ref_bearing_row(x, t, sigma=10.0, nz=36):
    dn, de = t[0] - x[0], t[1] - x[1]
    if abs(dn) < COINCIDENT and abs(de) < COINCIDENT:
        return [1.0 / nz] * nz
    beta = math.degrees(math.atan2(de, dn)) % 360.0
    w = []
    for k in range(nz):
        d = (k * 360.0 / nz - beta + 180.0) % 360.0 - 180.0
        w.append(math.exp(-d * d / (2 * sigma * sigma)))
    s = sum(w)
    return [v / s for v in w]


def ref_fov_p1(x, t, heading):
    dn, de = t[0] - x[0], t[1] - x[1]
    if abs(dn) < COINCIDENT and abs(de) < COINCIDENT:
        return 0.5
    beta = math.degrees(math.atan2(de, dn)) % 360.0
    d = abs((beta - heading + 180.0) % 360.0 - 180.0)
    if d <= 60.0:
        return 0.9
    if d >= 120.0:
        return 0.1
    return 0.5


def ref_entropy(p):
    return -sum(v * math.log(v) for v in p if v > 0)


def ref_mi(belief, rows):
    """H(b) - sum_z P(z) H(b | z) from a list of per-cell likelihood rows."""
    b = list(np.asarray(belief).ravel())
    nz = len(rows[0])
    total = ref_entropy(b)
    for z in range(nz):
        joint = [bi * r[z] for bi, r in zip(b, rows)]
        pz = sum(joint)
        if pz > 0:
            total -= pz * ref_entropy([j / pz for j in joint])
    return total


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale end-to-end run (tens of minutes)")


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[num])
