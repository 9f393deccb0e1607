import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpbsde.audit import run_audit
from jumpbsde.backward import (
    closed_form_oracle, feynman_kac_u, feynman_kac_z, solve_backward, value_function,
)
from jumpbsde.errors import AssumptionError, GeneratorError, ModelError
from jumpbsde.families import (
    constant_generator, constant_model, linear_ode_generator, single_jump, term_generator,
    zero_generator,
)
from jumpbsde.model import GeneratorSpec, JumpMeasureSpec, StoppingRule, TimeGrid
from jumpbsde.paths import hitting_time, simulate_paths


@pytest.fixture(scope="module")
def bundle():
    meas = single_jump(1.0, 1.0)
    return simulate_paths(constant_model(sigma=1.0, jump=1.0), meas, TimeGrid(0, 1, 20), 4000, 0)


def test_terminal_is_exact_and_tower_property(bundle):
    meas = single_jump(1.0, 1.0)
    xi = np.sin(bundle.states[:, -1, 0]) + 0.1
    sol = solve_backward(bundle, zero_generator(), meas, xi)
    assert np.array_equal(sol.Y[:, -1], xi)
    assert abs(sol.y0 - xi.mean()) <= 1e-12
    assert np.isfinite(sol.Y).all() and np.isfinite(sol.Z).all() and np.isfinite(sol.Gamma).all()


def test_brownian_martingale_within_three_se():
    b = simulate_paths(constant_model(sigma=1.0), JumpMeasureSpec.none(), TimeGrid(0, 1, 50), 10_000, 1)
    sol = solve_backward(b, zero_generator(), JumpMeasureSpec.none(), b.states[:, -1, 0])
    assert abs(sol.y0) <= 3 * sol.se
    assert abs(sol.se - 0.01) < 0.001


def test_constant_driver_is_exact_on_dyadic_grid(unit_jump, bm_jump_model):
    b = simulate_paths(bm_jump_model, unit_jump, TimeGrid(0, 1, 64), 500, 2)
    sol = solve_backward(b, constant_generator(1.0), unit_jump, np.zeros(500))
    assert sol.y0 == 1.0 and sol.se == 0.0
    np.testing.assert_allclose(sol.Y[0], 1 - b.grid.nodes, atol=1e-15)


def test_linear_ode_oracle(unit_jump, bm_jump_model, unit_grid):
    b = simulate_paths(bm_jump_model, unit_jump, unit_grid, 2000, 3)
    sol = solve_backward(b, linear_ode_generator(0.5), unit_jump, np.ones(2000))
    exact = closed_form_oracle("linear_ode", rho=0.5, T=1.0)(0.0, np.zeros(1))[0][0]
    assert abs(sol.y0 - exact) <= 0.01


def test_gamma_driver_self_refinement(unit_jump):
    model = constant_model(jump=1.0)
    gen = term_generator({"gamma": 1.0}, gamma=1.0, measure=unit_jump)
    coarse = simulate_paths(model, unit_jump, TimeGrid(0, 1, 25), 10_000, 4)
    fine = simulate_paths(model, unit_jump, TimeGrid(0, 1, 100), 10_000, 5)
    s1 = solve_backward(coarse, gen, unit_jump, coarse.states[:, -1, 0])
    s2 = solve_backward(fine, gen, unit_jump, fine.states[:, -1, 0])
    assert abs(s1.y0 - s2.y0) <= 3 * np.hypot(s1.se, s2.se) + 0.05
    assert abs(np.mean(s2.Gamma[:, :-1]) - 1.0) < 0.1


def test_value_function_examples(unit_jump, bm_jump_model):
    grid = TimeGrid(0, 1, 32)
    b = simulate_paths(bm_jump_model, unit_jump, grid, 4000, 6)
    xs = np.linspace(-0.5, 0.5, 5)[:, None]
    mart = solve_backward(b, zero_generator(), unit_jump, b.states[:, -1, 0],
                          terminal_fn=lambda x: x[:, 0])
    est = value_function(mart, grid.nodes[16], xs)
    np.testing.assert_allclose(est.value, xs[:, 0], atol=0.05)
    assert not est.any_extrapolated

    const = solve_backward(b, constant_generator(1.0), unit_jump, np.zeros(4000))
    for i in (0, 8, 31):
        np.testing.assert_allclose(const.value_function(grid.nodes[i], xs).value, 1 - grid.nodes[i],
                                   atol=1e-12)

    ode = solve_backward(b, linear_ode_generator(0.5), unit_jump, np.ones(4000))
    for i in (0, 16):
        np.testing.assert_allclose(ode.value_function(grid.nodes[i], xs).value,
                                   np.exp(-0.5 * (1 - grid.nodes[i])), atol=0.01)


def test_value_function_flags_extrapolation(unit_jump, bm_jump_model):
    b = simulate_paths(bm_jump_model, unit_jump, TimeGrid(0, 1, 10), 500, 7)
    sol = solve_backward(b, zero_generator(), unit_jump, b.states[:, -1, 0])
    est = sol.value_function(0.5, np.array([[0.0], [50.0]]))
    np.testing.assert_array_equal(est.extrapolated, [False, True])
    with pytest.raises(ModelError):
        sol.value_function(0.55, np.zeros((1, 1)))


def test_initial_node_returns_plain_mean(unit_jump, bm_jump_model):
    b = simulate_paths(bm_jump_model, unit_jump, TimeGrid(0, 1, 10), 500, 8)
    sol = solve_backward(b, linear_ode_generator(0.3), unit_jump, b.states[:, -1, 0] ** 2)
    assert sol.value_function(0.0, b.states[:1, 0]).value[0] == sol.y0


def test_feynman_kac_z_analytic():
    model = constant_model(sigma=0.7)
    assert feynman_kac_z(lambda t, x: x[:, 0], model, 0.0, [1.3])[0] == pytest.approx(0.7, abs=1e-12)
    square = constant_model(sigma=1.0)
    chi = feynman_kac_z(lambda t, x: x[:, 0] ** 2, square, 0.0, [2.0], h_fd=1e-4)
    assert abs(chi[0] - 4.0) <= 1e-6


def test_feynman_kac_z_on_regressed_surface():
    model = constant_model(sigma=0.3)
    b = simulate_paths(model, JumpMeasureSpec.none(), TimeGrid(0, 1, 50), 10_000, 9)
    sol = solve_backward(b, zero_generator(), JumpMeasureSpec.none(), b.states[:, -1, 0],
                         terminal_fn=lambda x: x[:, 0])
    chi = feynman_kac_z(sol.as_function(), model, 0.0, [0.0])[0]
    assert abs(chi - 0.3) <= 0.03
    assert abs(sol.z0[0] - chi) <= 0.03


@pytest.mark.parametrize("u, gamma, expected", [
    (lambda t, x: x[:, 0], 1.0, 2.0),
    (lambda t, x: np.full(x.shape[0], 3.0), 1.0, 0.0),
    (lambda t, x: x[:, 0] ** 3, 0.0, 0.0),
])
def test_feynman_kac_u_examples(u, gamma, expected):
    meas = single_jump(1.0, 2.0)
    gen = term_generator({}, gamma=gamma, measure=meas)
    for x in (0.0, 0.4, -3.7):
        zeta = feynman_kac_u(u, constant_model(jump=1.0), gen, meas, 0.0, [x])
        assert abs(zeta - expected) <= 4 * np.finfo(float).eps * (1 + abs(x))


def test_feynman_kac_u_two_components():
    meas = JumpMeasureSpec([1.0, 2.0], [[1.0, 0.5], [0.0, 2.0]])
    model = constant_model(m=1, l=2, jump=[[1.0, -1.0]])
    gen = term_generator({}, gamma=[0.5, 0.25], measure=meas)
    u = lambda t, x: x[:, 0] ** 2  # noqa: E731
    x = 0.3
    expected = 0.0
    for k, e in enumerate([1.0, 2.0]):
        for i, (sign, g) in enumerate([(1.0, 0.5), (-1.0, 0.25)]):
            expected += ((x + sign * e) ** 2 - x**2) * g * meas.intensities[i, k]
    assert feynman_kac_u(u, model, gen, meas, 0.0, [x]) == pytest.approx(expected, rel=1e-14)


def test_closed_form_oracles():
    y, z, g = closed_form_oracle("zero_driver_martingale")(0.3, np.array([1.0]))
    assert y[0] == 1.0 and z[0] == 1.0
    assert closed_form_oracle("constant_driver", k=1, T=1)(0.25, np.zeros(1))[0][0] == 0.75
    assert closed_form_oracle("linear_ode", rho=0.5, T=1)(0.0, np.zeros(1))[0][0] == np.exp(-0.5)
    with pytest.raises(ValueError, match="unknown oracle"):
        closed_form_oracle("heat_equation")


def test_stopped_paths_are_frozen(unit_jump, bm_jump_model):
    grid = TimeGrid(0, 1, 40)
    b = simulate_paths(bm_jump_model, unit_jump, grid, 2000, 10)
    tau = hitting_time(b, StoppingRule(0.5, 0.5, 0.0, (0.0,)))
    xi = b.states[np.arange(2000), tau, 0]
    sol = solve_backward(b, constant_generator(1.0), unit_jump, xi, stop=tau)
    for p in range(0, 2000, 97):
        s = tau[p]
        assert np.all(sol.Y[p, s:] == xi[p])
        assert np.all(sol.Z[p, s:] == 0) and np.all(sol.Gamma[p, s:] == 0)
    # Y_0 = E[xi] + E[tau]; E[xi] is the optional-stopping mean zero
    assert abs(sol.y0 - np.mean(xi) - np.mean(grid.nodes[tau])) <= 1e-12


def test_refuses_failed_certificate(unit_jump, bm_jump_model, unit_grid):
    gen = term_generator({"gamma": 1.0}, gamma=-1.5, measure=unit_jump)
    cert = run_audit(gen, unit_jump, unit_grid)
    b = simulate_paths(bm_jump_model, unit_jump, TimeGrid(0, 1, 5), 10, 0)
    with pytest.raises(AssumptionError, match="A4"):
        solve_backward(b, gen, unit_jump, np.zeros(10), certificate=cert)


def test_non_finite_driver_names_node_and_path(unit_jump, bm_jump_model):
    def f1(t, x, y, z, g):
        out = np.zeros_like(y)
        if t < 0.5:
            out[3] = np.nan
        return out

    gen = GeneratorSpec(f1, lambda t, e: np.zeros((len(e), 1)), lambda t: 0.0, lambda t: 0.0)
    b = simulate_paths(bm_jump_model, unit_jump, TimeGrid(0, 1, 4), 10, 0)
    with pytest.raises(GeneratorError, match=r"\(node 1, path 3\)"):
        solve_backward(b, gen, unit_jump, np.zeros(10))


def test_terminal_shape_checked(bundle, unit_jump):
    with pytest.raises(ModelError):
        solve_backward(bundle, zero_generator(), unit_jump, np.zeros(3))


def test_solution_is_deterministic(bundle, unit_jump):
    gen = term_generator({"y": -0.3, "sin_z": 0.5, "gamma": 0.2}, gamma=0.5, measure=unit_jump)
    xi = np.abs(bundle.states[:, -1, 0])
    a = solve_backward(bundle, gen, unit_jump, xi)
    b = solve_backward(bundle, gen, unit_jump, xi)
    assert np.array_equal(a.Y, b.Y) and np.array_equal(a.Z, b.Z) and np.array_equal(a.Gamma, b.Gamma)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1), st.floats(-3, 3))
def test_scheme_is_linear_for_linear_drivers(ay, az, ag, alpha):
    meas = single_jump(1.0, 1.0)
    b = simulate_paths(constant_model(sigma=1.0, jump=1.0), meas, TimeGrid(0, 1, 8), 300, 11)
    gen = term_generator({"y": ay, "z": az, "gamma": ag}, gamma=1.0, measure=meas)
    x = b.states[:, -1, 0]
    xi1, xi2 = np.cos(x), x**2
    y1 = solve_backward(b, gen, meas, xi1).Y
    y2 = solve_backward(b, gen, meas, xi2).Y
    y12 = solve_backward(b, gen, meas, alpha * xi1 + xi2).Y
    np.testing.assert_allclose(y12, alpha * y1 + y2, atol=1e-8 * (1 + np.abs(y12).max()))


@given(st.floats(-5, 5), st.floats(-2, 2))
def test_constant_driver_shifts_by_k_times_horizon(k, shift):
    meas = single_jump(1.0, 1.0)
    b = simulate_paths(constant_model(sigma=1.0, jump=1.0), meas, TimeGrid(0, 1, 16), 200, 12)
    xi = b.states[:, -1, 0] + shift
    sol = solve_backward(b, constant_generator(k), meas, xi)
    assert sol.y0 == pytest.approx(xi.mean() + k, abs=1e-12)
