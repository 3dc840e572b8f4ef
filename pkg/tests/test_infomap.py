import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_belief, ref_bearing_row, ref_fov_p1, ref_mi
from infonet.grid import GridSpec, cell_center, point_belief, pose_at, uniform_belief
from infonet.histfilter import entropy
from infonet.infomap import (InfoMap, fisher_map, fisher_matrix, mi_map, mi_map_r2, mi_map_se2,
                             mi_states, mutual_info_at, normalize_map)
from infonet.sensors import BearingSensor, FovSensor, build_table


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def test_point_mass_gives_zero(bearing8, grid8, fov6):
    s, tab = bearing8
    for cell in [(0, 0), (3, 4), (7, 7)]:
        assert np.abs(mi_map(point_belief(grid8, cell), tab).values).max() <= 1e-12
    g, fs, ftab = fov6
    assert np.abs(mi_map(point_belief(g, (2, 2)), ftab).values).max() <= 1e-12
    assert mutual_info_at(point_belief(grid8, (1, 1)), s, (3.0, 4.0), grid8) <= 1e-12


def test_fov_two_cell_hand_value():
    g = GridSpec(n=8)
    b = np.zeros((8, 8))
    b[5, 2] = 0.5   # due north of the sensor: front cone
    b[2, 5] = 0.5   # due east: side
    x = pose_at(g, (2, 2), 0)
    expected = binary_entropy(0.7) - 0.5 * binary_entropy(0.9) - 0.5 * binary_entropy(0.5)
    assert mutual_info_at(b, FovSensor(), x, g) == pytest.approx(expected, abs=1e-12)


def test_bearing_matches_definitional_oracle_n4(grid4):
    s = BearingSensor()
    rng = np.random.default_rng(11)
    for _ in range(5):
        b = random_belief(rng, 4, 0.2)
        for xi in range(16):
            x = pose_at(grid4, divmod(xi, 4))
            rows = [ref_bearing_row(x, cell_center(grid4, divmod(t, 4))) for t in range(16)]
            assert abs(mutual_info_at(b, s, x, grid4) - ref_mi(b, rows)) < 1e-9


def test_r2_map_equals_pointwise_calls(bearing8, grid8):
    s, tab = bearing8
    b = random_belief(np.random.default_rng(5), 8)
    m = mi_map_r2(b, s, grid8, tab)
    assert m.elapsed is not None and m.elapsed >= 0
    for i in range(8):
        for j in range(8):
            assert m.values[i, j] == mutual_info_at(b, s, pose_at(grid8, (i, j)), grid8)


def test_se2_map_equals_exhaustive_oracle(fov6):
    g, s, tab = fov6
    b = random_belief(np.random.default_rng(6), 6)
    m = mi_map_se2(b, s, g, tab).values
    assert m.shape == (6, 6, 8)
    for i in range(6):
        for j in range(6):
            for h in range(8):
                x = pose_at(g, (i, j), h)
                rows = []
                for t in range(36):
                    p1 = ref_fov_p1(x, cell_center(g, divmod(t, 6)), x.heading)
                    rows.append([1 - p1, p1])
                assert abs(m[i, j, h] - ref_mi(b, rows)) < 1e-9


def test_mi_states_subset_bit_identical(bearing8, grid8):
    _, tab = bearing8
    b = random_belief(np.random.default_rng(9), 8)
    full = mi_map(b, tab).values.ravel()
    idx = [3, 17, 40, 63]
    assert np.array_equal(mi_states(b, tab, idx), full[idx])


def test_uniform_bearing_map_rotation_invariant(bearing8, grid8):
    m = mi_map(uniform_belief(grid8), bearing8[1]).values
    for k in range(1, 4):
        np.testing.assert_allclose(np.rot90(m, k), m, atol=1e-9, rtol=0)
    np.testing.assert_allclose(m.T, m, atol=1e-9, rtol=0)


def test_uniform_fov_joint_rotation(fov6):
    g, s, tab = fov6
    m = mi_map(uniform_belief(g), tab).values
    q = g.heading_bins // 4
    for h in range(g.heading_bins):
        np.testing.assert_allclose(m[:, :, (h + q) % g.heading_bins], np.rot90(m[:, :, h], 1),
                                   atol=1e-9, rtol=0)


SYMMETRIES = [
    lambda a: np.rot90(a, 1), lambda a: np.rot90(a, 2), lambda a: np.rot90(a, 3),
    np.transpose, np.flipud, np.fliplr,
]


@pytest.mark.parametrize("sym", range(len(SYMMETRIES)))
def test_maps_equivariant_under_square_symmetries(sym, bearing8, grid8):
    f = SYMMETRIES[sym]
    _, tab = bearing8
    b = random_belief(np.random.default_rng(sym), 8)
    np.testing.assert_allclose(mi_map(f(b).copy(), tab).values, f(mi_map(b, tab).values), atol=1e-9, rtol=0)
    fa = fisher_map(f(b).copy(), grid8).values
    fb = f(fisher_map(b, grid8).values)
    np.testing.assert_allclose(fa, fb, rtol=1e-9, atol=1e-12 * fb.max())


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(0, 63))
def test_mi_bounds(seed, xi):
    g = GridSpec(n=8)
    b = random_belief(np.random.default_rng(seed), 8, 0.5)
    x = pose_at(g, divmod(xi, 8))
    v = mutual_info_at(b, BearingSensor(), x, g)
    assert 0.0 <= v <= min(entropy(b), math.log(36)) + 1e-12


def test_table_mismatch_rejected(bearing8, grid8, fov6):
    s, tab = bearing8
    with pytest.raises(ValueError):
        mi_map_r2(uniform_belief(GridSpec(n=6)), s, GridSpec(n=6), tab)
    with pytest.raises(ValueError):
        mi_map_r2(uniform_belief(grid8), BearingSensor(sigma=5), grid8, tab)
    g, fs, ftab = fov6
    with pytest.raises(ValueError):
        mi_map_r2(uniform_belief(g), fs, g, ftab)


# Fisher information

def test_fisher_matrix_examples():
    np.testing.assert_allclose(fisher_matrix((0, 0), (0, 1), 1.0), [[1, 0], [0, 0]], atol=1e-15)
    np.testing.assert_allclose(fisher_matrix((0, 0), (1, 0), 1.0), [[0, 0], [0, 1]], atol=1e-15)
    near = fisher_matrix((0, 0), (1.0, 2.0), 1.0)
    far = fisher_matrix((0, 0), (2.0, 4.0), 1.0)
    np.testing.assert_allclose(far, near / 4, rtol=1e-12)
    assert not fisher_matrix((0, 0), (0.1, 0), 1.0, min_range=1.0).any()
    assert not fisher_matrix((5, 5), (5, 5), 1.0).any()


def test_fisher_point_mass_and_collinear(grid8):
    assert np.abs(fisher_map(point_belief(grid8, (2, 6)), grid8).values).max() <= 1e-12
    b = np.zeros((8, 8))
    b[2, 5] = b[2, 7] = 0.5     # both due east of (2, 1)
    assert fisher_map(b, grid8).values[2, 1] <= 1e-12


def fisher_oracle(b, g, sigma_deg):
    sig = math.radians(sigma_deg)
    out = np.zeros((g.n, g.n))
    for xi in range(g.n * g.n):
        x = cell_center(g, divmod(xi, g.n))
        F = np.zeros((2, 2))
        for t in range(g.n * g.n):
            c = cell_center(g, divmod(t, g.n))
            F += b.ravel()[t] * fisher_matrix(x, c, sig, min_range=g.width / 2)
        out[divmod(xi, g.n)] = max(np.linalg.det(F), 0.0)
    return out


def test_fisher_map_matches_double_loop(grid8):
    for b in (uniform_belief(grid8), random_belief(np.random.default_rng(2), 8)):
        m = fisher_map(b, grid8).values
        ref = fisher_oracle(b, grid8, 10.0)
        np.testing.assert_allclose(m, ref, rtol=1e-9, atol=1e-9 * ref.max())


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_fisher_accumulator_psd(seed):
    g = GridSpec(n=6)
    b = random_belief(np.random.default_rng(seed), 6, 0.3)
    sig = math.radians(10)
    for xi in range(36):
        x = cell_center(g, divmod(xi, 6))
        F = sum(b.ravel()[t] * fisher_matrix(x, cell_center(g, divmod(t, 6)), sig, g.width / 2)
                for t in range(36))
        assert np.allclose(F, F.T)
        assert np.linalg.eigvalsh(F).min() >= -1e-12 * max(1.0, np.abs(F).max())
    assert fisher_map(b, g).values.min() >= 0


# normalization

def test_normalize_map():
    m = np.random.default_rng(0).random((5, 5))
    m /= m.sum()
    n1 = normalize_map(m)
    np.testing.assert_allclose(n1.values, m, atol=1e-15)
    assert n1.normalized and not n1.degenerate
    z = normalize_map(InfoMap(np.zeros((4, 4))))
    assert z.degenerate and np.allclose(z.values, 1 / 16)
    np.testing.assert_allclose(normalize_map(np.full((3, 3), 7.0)).values, 1 / 9)
    with pytest.raises(ValueError):
        normalize_map(np.array([[1.0, -0.1]]))
    with pytest.raises(ValueError):
        normalize_map(np.array([[1.0, np.nan]]))
    assert normalize_map(np.array([[1.0, -1e-12]])).values.min() == 0.0
