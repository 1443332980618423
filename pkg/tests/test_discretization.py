import numpy as np
import pytest

from geoanneal import circuits as cm
from geoanneal.discretization import (Mesh, assemble_1q, assemble_2q, cshunt_mesh, dump_triplets,
                                      load_triplets)
from geoanneal.errors import DimensionOverflow, NonFiniteValue
from geoanneal.pipeline import cjj_pair_system, cshunt_system
from geoanneal.spectral import lowest_eigenpairs


def test_harmonic_oscillator_levels_converge_at_second_order():
    c, k = 0.7, 3.0
    omega = np.sqrt(2 * c * k)
    exact = omega * (np.arange(4) + 0.5)
    errs = []
    for points in (601, 1201):
        H = assemble_1q(Mesh(-12, 12, points), c, lambda x: 0.5 * k * x ** 2)
        errs.append(np.abs(lowest_eigenpairs(H, 4)[0] - exact).max())
    assert errs[1] < 1e-3
    assert 3.8 < errs[0] / errs[1] < 4.2


def test_two_axis_operator_is_a_tensor_sum_without_coupling():
    m = Mesh(-6, 6, 61)
    pa, pb = (lambda x: 0.5 * x ** 2), (lambda x: 0.8 * (x - 0.3) ** 2 + 0.1 * x ** 4)
    H = assemble_2q(m, m, 0.5, pa, pb, lambda a, b: 0 * a)
    Ea = np.linalg.eigvalsh(assemble_1q(m, 0.5, pa).dense())
    Eb = np.linalg.eigvalsh(assemble_1q(m, 0.5, pb).dense())
    expected = np.sort((Ea[:4, None] + Eb[None, :4]).ravel())[:4]
    np.testing.assert_allclose(np.linalg.eigvalsh(H.dense())[:4], expected, rtol=1e-10)


def test_two_axis_exchange_symmetry():
    m = Mesh(-4, 4, 41)
    p = lambda x: x ** 4 - 2 * x ** 2
    H = assemble_2q(m, m, 0.5, p, p, lambda a, b: 0.3 * a * b).dense()
    L = m.points
    P = np.eye(L * L).reshape(L, L, L, L).transpose(1, 0, 2, 3).reshape(L * L, L * L)
    np.testing.assert_allclose(P @ H @ P.T, H, atol=1e-12)


def test_operator_is_symmetric_and_bounded():
    system = cshunt_system(L=100)
    H = system.biased_operator(0.5, 0.01)
    assert abs(H.matrix - H.matrix.T).max() == 0
    w = np.linalg.eigvalsh(H.dense())
    assert H.lower_bound() <= w[0]
    assert H.norm_bound() >= np.abs(w).max()


def test_dimension_cap():
    m = Mesh(-1, 1, 50)
    with pytest.raises(DimensionOverflow):
        assemble_2q(m, m, 1.0, np.zeros(50), np.zeros(50), lambda a, b: 0 * a, cap=2000)


def test_non_finite_potential_is_rejected():
    m = Mesh(-1, 1, 5)
    with pytest.raises(NonFiniteValue):
        assemble_1q(m, 1.0, np.array([0, 1, np.nan, 1, 0]))


def test_triplet_round_trip(tmp_path):
    H = cshunt_system(L=50).biased_operator(0.3, 0.0)
    back = load_triplets(dump_triplets(H, tmp_path / "h.txt"))
    assert (abs(back.matrix - H.matrix)).max() == 0


def test_widened_mesh_keeps_spacing():
    m = Mesh(-2, 2, 41)
    w = m.widened(1.5)
    assert w.spacing == pytest.approx(m.spacing)
    assert w.lower < m.lower and w.upper > m.upper


def test_cjj_domain_enlargement_does_not_move_the_levels():
    system = cjj_pair_system(L=200)
    sched = system.sched
    for s in (0.0, 1.0):
        for mesh in (system.mesh, system.mesh.widened(1.3)):
            pot = cm.cjj_potential(mesh.nodes, s, 1.0, system.params, sched, 0.02)
            E = lowest_eigenpairs(assemble_1q(mesh, system.kinetic, pot), 2)[0]
            if mesh is system.mesh:
                ref = E
        assert np.max(np.abs(E - ref) / np.abs(ref)) < 1e-6


def test_cshunt_mesh_is_periodic_interval():
    m = cshunt_mesh(600)
    assert m.lower == -np.pi and m.upper == np.pi
