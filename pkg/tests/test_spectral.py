import numpy as np
import pytest

from geoanneal.discretization import Mesh, assemble_1q
from geoanneal.errors import AmbiguousOverlap, DegenerateSubspace
from geoanneal.pipeline import cshunt_system
from geoanneal.spectral import (SpectralSlice, dense_eigenpairs, fix_gauge, lowest_eigenpairs,
                                spectral_sweep)


def test_iterative_matches_dense():
    H = cshunt_system(L=120).biased_operator(0.6, 0.005)
    E, v, nxt, res = lowest_eigenpairs(H, 3)
    Ed, vd = dense_eigenpairs(H, 4)
    np.testing.assert_allclose(E, Ed[:3], rtol=1e-12)
    assert nxt == pytest.approx(Ed[3], rel=1e-12)
    np.testing.assert_allclose(np.abs(v.T @ vd[:, :3]), np.eye(3), atol=1e-8)
    assert res < 1e-9


def test_degenerate_levels_are_reported():
    m = Mesh(-8, 8, 161)
    # two far-apart identical wells: tunnelling splitting far below the threshold
    H = assemble_1q(m, 0.05, lambda x: 40 * np.minimum((x - 5) ** 2, (x + 5) ** 2))
    with pytest.raises(DegenerateSubspace):
        lowest_eigenpairs(H, 2)


def _rotation_slices(theta, flips=None):
    out = []
    for j, t in enumerate(theta):
        st = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        if flips is not None:
            st = st * flips[j]
        out.append(SpectralSlice(j / (len(theta) - 1), np.array([0.0, 1.0]), st))
    return out


def test_gauge_fix_removes_random_sign_flips():
    theta = np.linspace(0, 1.0, 30)
    rng = np.random.default_rng(5)
    flips = rng.choice([-1.0, 1.0], size=(30, 2))
    fixed = fix_gauge(_rotation_slices(theta, flips))
    clean = fix_gauge(_rotation_slices(theta))
    for a, b in zip(fixed, clean):
        np.testing.assert_array_equal(a.states, b.states)


def test_ambiguous_overlap_carries_the_interval():
    theta = np.array([0.0, 0.1, 1.3, 1.4])
    with pytest.raises(AmbiguousOverlap) as info:
        fix_gauge(_rotation_slices(theta))
    assert info.value.interval == (1, 2)


def test_sweep_refines_an_ambiguous_interval():
    def solve(s):
        t = 3.0 * s
        st = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        return SpectralSlice(s, np.array([0.0, 1.0]), st)

    slices = spectral_sweep(solve, [0.0, 0.5, 1.0])
    assert len(slices) > 3
    for a, b in zip(slices, slices[1:]):
        assert np.all(np.einsum("ia,ia->a", a.states, b.states) > 0.5)


def test_slices_are_orthonormal():
    from geoanneal.pipeline import build_static
    from conftest import small_cshunt
    static = build_static(small_cshunt())
    assert max(sl.orthonormality_error() for sl in static.slices) < 1e-10
