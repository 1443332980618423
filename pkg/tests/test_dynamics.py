import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from geoanneal import _dp45_py
from geoanneal import circuits as cm
from geoanneal import dynamics as dyn
from geoanneal.errors import MismatchedRuns, StepFailure, ValidationError


def _generator(t_f, include_G=True, M=30, seed=0):
    rng = np.random.default_rng(seed)
    s = np.linspace(0, 1, M)
    E = np.stack([np.zeros(M), 1 + 0.5 * np.cos(3 * s), 2.5 + 0.2 * s], axis=1)
    K = rng.normal(size=(3, 3))
    K = K - K.T
    G = np.array([1j * K * np.sin(2 + x) for x in s])
    return dyn.SplineGenerator(s, E, G, t_f, include_G=include_G)


def test_zero_generator_keeps_the_state():
    s = np.linspace(0, 1, 10)
    gen = dyn.SplineGenerator(s, np.zeros((10, 2)), np.zeros((10, 2, 2)), 3.0)
    psi0 = np.array([0.6, 0.8j])
    traj = dyn.propagate(gen, psi0)
    np.testing.assert_allclose(traj.states, np.tile(psi0, (101, 1)), atol=1e-15)


def test_diagonal_generator_phases():
    s = np.linspace(0, 1, 40)
    E = np.stack([np.zeros(40), 2.0 + s], axis=1)
    gen = dyn.SplineGenerator(s, E, np.zeros((40, 2, 2)), 4.0, include_G=False, subtract_mean=False)
    psi0 = np.array([1, 1]) / np.sqrt(2)
    traj = dyn.propagate(gen, psi0)
    phase = np.exp(-1j * 4.0 * (2.0 + 0.5))
    np.testing.assert_allclose(traj.final, psi0 * np.array([1, phase]), atol=1e-8)
    np.testing.assert_allclose(traj.populations[:, 0], 0.5, atol=1e-12)


def test_matches_an_independent_integrator():
    gen = _generator(5.0)
    psi0 = dyn.ground_state(3)
    traj = dyn.propagate(gen, psi0, [0.0, 0.5, 1.0], backend="python")
    ref = solve_ivp(lambda s, y: -1j * gen(s) @ y, (0, 1), psi0, method="DOP853",
                    rtol=1e-12, atol=1e-14, t_eval=[0.0, 0.5, 1.0])
    np.testing.assert_allclose(traj.states, ref.y.T, atol=1e-8)


@pytest.mark.skipif(not dyn.COMPILED_AVAILABLE, reason="compiled kernel not built")
def test_compiled_and_python_kernels_agree():
    gen = _generator(20.0)
    a = dyn.propagate(gen, dyn.ground_state(3), backend="python")
    b = dyn.propagate(gen, dyn.ground_state(3), backend="compiled")
    assert a.info["nsteps"] == b.info["nsteps"]
    np.testing.assert_allclose(a.states, b.states, atol=1e-12)


def test_t_f_zero_limit_closed_form():
    # constant G: the with-G run is exp(iG) psi0, the without-G run is static
    s = np.linspace(0, 1, 10)
    K = np.array([[0, 1.0], [-1.0, 0]])
    G = np.array([1j * K * 0.8] * 10)
    gen_G = dyn.SplineGenerator(s, np.zeros((10, 2)), G, 1e-12)
    gen_n = dyn.SplineGenerator(s, np.zeros((10, 2)), G, 1e-12, include_G=False)
    psi0 = dyn.ground_state(2)
    a = dyn.propagate(gen_G, psi0, [0, 1], basis=dyn.INSTANTANEOUS)
    b = dyn.propagate(gen_n, psi0, [0, 1], basis=dyn.INSTANTANEOUS, include_G=False)
    fid = dyn.fidelity_series(a, b)[-1]
    closed = abs(psi0.conj() @ expm(1j * G[0]) @ psi0) ** 2
    assert fid == pytest.approx(closed, abs=1e-9)


def test_reparametrized_protocol_has_the_same_endpoint():
    gen = _generator(6.0)
    a = dyn.propagate(gen, dyn.ground_state(3), [0, 1], backend="python")
    b = dyn.propagate(dyn.Reparametrized(gen, cm.SMOOTHSTEP), dyn.ground_state(3), [0, 1])
    assert np.linalg.norm(a.final - b.final) < 10 * dyn.RTOL


def test_tighter_tolerance_reduces_norm_drift():
    gen = _generator(80.0)
    d1 = dyn.propagate(gen, dyn.ground_state(3), rtol=1e-8).norm_drift()
    d2 = dyn.propagate(gen, dyn.ground_state(3), rtol=1e-9).norm_drift()
    assert d2 < d1


def test_step_failure_on_a_broken_generator():
    gen = lambda s: np.full((2, 2), np.nan) if s > 0.5 else np.zeros((2, 2))
    gen.n = 2
    with pytest.raises(StepFailure):
        dyn.propagate(gen, dyn.ground_state(2))


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_step_failure_on_non_finite_coefficients(backend):
    if backend == "compiled" and not dyn.COMPILED_AVAILABLE:
        pytest.skip("compiled kernel not built")
    x = np.linspace(0, 1, 10)
    f_c = np.zeros((4, 9))
    f_c[3] = 1.0
    D_c = np.zeros((4, 9, 2, 2), dtype=complex)
    D_c[3, 6:] = np.nan
    gen = _dp45_py.PiecewiseCubic(x, f_c, D_c, np.zeros_like(D_c))
    with pytest.raises(StepFailure):
        dyn.propagate(gen, dyn.ground_state(2), backend=backend)


def test_step_budget_is_reported():
    states, info = _dp45_py.integrate(_generator(50.0), dyn.ground_state(3), [0, 1], max_steps=5)
    assert info["status"] == 2


def test_fidelity_needs_matching_runs():
    gen = _generator(2.0)
    a = dyn.propagate(gen, dyn.ground_state(3), t_f=2.0)
    b = dyn.propagate(gen, dyn.ground_state(3), t_f=3.0)
    with pytest.raises(MismatchedRuns):
        dyn.fidelity_series(a, b)
    c = dyn.propagate(gen, dyn.ground_state(3), t_f=2.0, basis=dyn.COMPUTATIONAL)
    with pytest.raises(MismatchedRuns):
        dyn.fidelity_series(a, c)
    np.testing.assert_allclose(dyn.fidelity_series(a, a), 1.0, atol=1e-14)


def test_initial_state_must_be_normalised():
    with pytest.raises(ValidationError):
        dyn.propagate(_generator(1.0), np.array([1.0, 1.0, 0.0]))


def test_adiabatic_threshold():
    assert dyn.adiabatic_threshold([1, 2, 5, 10], [0.9, 0.9995, 0.998, 0.9999]) == 10
    assert dyn.adiabatic_threshold([1, 2], [0.5, 0.6]) is None


def test_small_pipeline_dynamics_consistency():
    from conftest import small_cshunt
    from geoanneal.pipeline import build_static
    static = build_static(small_cshunt(points=60, L=300))
    inst, _ = dyn.run_pair(static, 5.0, basis=dyn.INSTANTANEOUS, s_out=[0, 1])
    comp, comp_noG = dyn.run_pair(static, 5.0, basis=dyn.COMPUTATIONAL, s_out=[0, 1])
    mapped = dyn.to_computational(inst, static.vfield)
    np.testing.assert_allclose(mapped.populations[-1], comp.populations[-1], atol=1e-6)
    np.testing.assert_allclose(comp.populations.sum(axis=1), 1, atol=1e-8)
    assert dyn.fidelity_series(comp, comp_noG)[0] == pytest.approx(1.0, abs=1e-14)
