import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoanneal import circuits as cm
from geoanneal.errors import DivisionByZero, MissingTable, ValidationError


def test_cshunt_potential_pinned_value_without_reflection():
    params = cm.CircuitParams(3.03, 86.2, cshunt_scale=1e4, reflect_cjj=False)
    sched = cm.Schedule(cm.uniform_grid(10), (2.9, 2.2))
    value = cm.cshunt_potential(0.0, 0.0, params, sched)
    assert value == pytest.approx(-2 * 86.2 * (np.cos(1.45) + 1), rel=1e-14)


def test_reflection_maps_flux_to_its_mirror():
    params = cm.cshunt_preset()
    sched = cm.Schedule(cm.uniform_grid(10), (2.9, 2.2))
    value = cm.cshunt_potential(0.0, 0.0, params, sched)
    assert value == pytest.approx(-2 * 86.2 * (np.cos(np.pi - 1.45) + 1), rel=1e-14)


def test_potential_derivative_matches_difference_quotient():
    params = cm.cjj_preset()
    sched = cm.Schedule(cm.uniform_grid(10), (2.6, 1.9))
    phi = np.linspace(-2, 2, 7)
    s, ds = 0.4, 1e-6
    rate = 0.3
    up = cm.cjj_potential(phi, s + ds, 1.0, params, sched, 0.01 + rate * ds)
    dn = cm.cjj_potential(phi, s - ds, 1.0, params, sched, 0.01 - rate * ds)
    exact = cm.cjj_potential_ds(phi, s, 1.0, params, sched, 0.01, rate)
    np.testing.assert_allclose((up - dn) / (2 * ds), exact, rtol=1e-6, atol=1e-5)


def test_params_validation_names_the_field():
    with pytest.raises(ValidationError) as info:
        cm.CircuitParams(-1.0, 86.2)
    assert info.value.key == "kinetic_energy"
    with pytest.raises(ValidationError):
        cm.CircuitParams(3.0, 80.0).require("inductive_energy")


@pytest.mark.parametrize("grid", [[0, 0.5], [0.1, 0.5, 1.0], [0, 0.6, 0.5, 1.0]])
def test_schedule_rejects_bad_grids(grid):
    with pytest.raises(ValidationError):
        cm.Schedule(np.array(grid, float))


def test_smoothstep_is_a_valid_reparametrization():
    k = cm.SMOOTHSTEP
    s = np.linspace(0, 1, 1001)
    assert k.value(0.0) == 0 and k.value(1.0) == 1
    assert np.all(np.diff(k.value(s)) > 0)
    np.testing.assert_allclose(np.gradient(k.value(s), s)[1:-1], k.d1(s)[1:-1], atol=1e-5)
    np.testing.assert_allclose(k.inverse(k.value(s)), s, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.02, 0.3), st.floats(1.0, 10.0))
def test_graded_grid_is_increasing_and_anchored(center, width, ratio):
    g = cm.graded_grid(50, center, width, ratio)
    assert g[0] == 0.0 and g[-1] == 1.0
    assert np.all(np.diff(g) > 0)


def test_graded_grid_concentrates_points():
    g = cm.graded_grid(200, 0.6, 0.1, 6.0)
    near = np.sum(np.abs(g - 0.6) < 0.1)
    assert near > 2 * 200 * 0.2


def test_control_fluxes_need_a_table():
    sched = cm.Schedule(cm.uniform_grid(5))
    with pytest.raises(MissingTable):
        cm.control_fluxes(0.5, "cjj", sched, cm.cjj_preset())
    table = cm.PersistentCurrentTable(np.linspace(0, 1, 5), script_current=np.zeros(5))
    with pytest.raises(DivisionByZero):
        cm.control_fluxes(0.5, "cshunt", sched, cm.cshunt_preset(), table)


def test_control_fluxes_cjj_proportional_to_current():
    p = cm.cjj_preset()
    sched = cm.Schedule(cm.uniform_grid(5), (2.6, 1.9))
    s = np.linspace(0, 1, 5)
    table = cm.PersistentCurrentTable(s, current=100 + 50 * s)
    pc, px = cm.control_fluxes(s, "cjj", sched, p, table)
    np.testing.assert_allclose(pc, 2.6 * (1 - s) + 1.9 * s)
    np.testing.assert_allclose(px, p.mutual_energy / p.inductive_energy ** 2 * (100 + 50 * s))


def test_cshunt_table_relation():
    p = cm.cshunt_preset()
    sched = cm.Schedule(cm.uniform_grid(5))
    s = np.linspace(0, 1, 5)
    table = cm.PersistentCurrentTable(s, current=2 + s, script_current=3 + s)
    _, px = cm.control_fluxes(s, "cshunt", sched, p, table)
    np.testing.assert_allclose(px, (2 + s) ** 2 / (1e4 * (3 + s)))


def test_table_is_exact_at_nodes():
    s = np.linspace(0, 1, 11)
    values = np.sin(7 * s)
    table = cm.PersistentCurrentTable(s, current=values)
    assert np.array_equal(table.value("current", s), values)


def test_problem_ising_signs():
    realised = cm.problem_ising("cjj", cm.preset_cjj_ising(), 2)
    assert realised.local_fields == (1.0, 0.4)
    assert realised.coupling(0, 1) == pytest.approx(0.7)
    assert cm.problem_ising("cshunt", None, 1).local_fields == (-1.0,)
