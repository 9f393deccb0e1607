import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpbsde.errors import ModelError
from jumpbsde.families import (
    AffineTerminal, QuadraticTerminal, constant_model, identity_terminal, single_jump,
    term_generator, zero_generator,
)
from jumpbsde.model import (
    ForwardModel, JumpMeasureSpec, StoppingRule, TerminalSpec, TimeGrid, validate_model,
)


@given(st.floats(0, 10), st.floats(1e-3, 10), st.integers(1, 500))
def test_grid_nodes_strictly_increasing(t0, horizon, n):
    g = TimeGrid(t0, t0 + horizon, n)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] == t0 and g.nodes[-1] == t0 + horizon
    assert np.isclose(g.dt.sum(), horizon)


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_grid_rejects_bad_step_count(bad):
    with pytest.raises(ModelError):
        TimeGrid(0.0, 1.0, bad)


def test_grid_rejects_non_increasing_nodes():
    with pytest.raises(ModelError):
        TimeGrid.from_nodes([0.0, 0.5, 0.5, 1.0])


def test_grid_index_lookup():
    g = TimeGrid(0.0, 1.0, 4)
    assert g.index_of(0.5) == 2
    assert g.floor_index(0.6) == 2
    assert g.floor_index(0.75) == 3
    with pytest.raises(ModelError, match="not a node"):
        g.index_of(0.3)


def test_subgrid_keeps_nodes():
    g = TimeGrid(0.0, 1.0, 10)
    s = g.subgrid(2, 5)
    np.testing.assert_array_equal(s.nodes, g.nodes[2:6])


def test_jump_measure_rates():
    meas = JumpMeasureSpec([1.0, 2.0], [[1.0, 2.0], [0.0, 0.5]])
    np.testing.assert_array_equal(meas.component_rates, [3.0, 0.5])
    assert meas.total_intensity == 3.5 and meas.enabled
    assert not JumpMeasureSpec.none(2).enabled


@pytest.mark.parametrize("lam", [[[-1.0]], [[np.inf]], [[1.0, 2.0]]])
def test_jump_measure_rejects_bad_intensity(lam):
    with pytest.raises(ModelError):
        JumpMeasureSpec([1.0], lam)


@pytest.mark.parametrize("eta, delta", [(0.0, 1.0), (1.0, -1.0), (np.inf, 1.0), (1.0, np.nan)])
def test_stopping_rule_requires_positive_finite(eta, delta):
    with pytest.raises(ModelError):
        StoppingRule(eta, delta, 0.0, (0.0,))


def test_forward_model_checks_x0_shape():
    with pytest.raises(ModelError):
        constant_model(m=2).started_at(0.0, [1.0, 2.0, 3.0])


def test_validate_trivial_model_passes():
    model = constant_model(sigma=1.0)
    rep = validate_model(model, zero_generator(), identity_terminal(), TimeGrid(0, 1, 10))
    assert rep.passed, rep.to_dict()


def test_validate_gamma_below_minus_one_fails_with_witness():
    meas = single_jump(1.0, 1.0)
    gen = term_generator({"gamma": 1.0}, gamma=-1.5, measure=meas)
    rep = validate_model(constant_model(sigma=1.0, jump=1.0), gen, identity_terminal(),
                         TimeGrid(0, 1, 10), meas)
    assert not rep.passed
    check = rep["A4_gamma_lower_bound"]
    assert not check.passed and check.witness["gamma"] == -1.5


def test_validate_terminal_growth_witness_at_domain_edge():
    term = TerminalSpec(QuadraticTerminal(1.0), 1.0, "square")
    rep = validate_model(constant_model(sigma=1.0), zero_generator(), term, TimeGrid(0, 1, 10),
                         domain_radius=3.0)
    check = rep["terminal_growth"]
    assert not check.passed
    assert abs(check.witness["x"][0]) == 3.0
    assert check.witness["h"] == 9.0 and check.witness["bound"] == 4.0


def test_validate_reports_coefficient_evaluation_error():
    def broken(t, x):
        raise RuntimeError("boom")

    base = constant_model(sigma=1.0)
    model = ForwardModel(1, 1, broken, base.b, base.c, base.x0)
    with pytest.raises(ModelError, match="coefficient evaluation error in a"):
        validate_model(model, zero_generator(), identity_terminal(), TimeGrid(0, 1, 4))


def test_validate_forward_lipschitz_bound():
    model = constant_model(drift=1.0, sigma=1.0)
    assert validate_model(model, zero_generator(), identity_terminal(),
                          TimeGrid(0, 1, 4))["forward_lipschitz_x"].passed


def test_validate_is_deterministic():
    term = TerminalSpec(AffineTerminal(0.0, (5.0,)), 1.0, "steep")
    args = (constant_model(sigma=1.0), zero_generator(), term, TimeGrid(0, 1, 10))
    assert validate_model(*args, seed=7).to_dict() == validate_model(*args, seed=7).to_dict()
