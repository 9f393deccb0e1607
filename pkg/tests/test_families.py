import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpbsde.errors import ConfigError
from jumpbsde.families import (
    AbsTerminal, AffineTerminal, ConstantGamma, Modulus, PolyDiffusion, PolyDrift, PolyJump,
    TabulatedGamma, TermGenerator, constant_model, single_jump,
)


def test_poly_coefficient_shapes():
    x = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    a = PolyDrift(np.array([[1.0, 2.0], [0.0, 1.0]]))(0.0, x)
    np.testing.assert_array_equal(a, [[3.0, 2.0], [1.0, -1.0], [7.0, 0.5]])
    assert PolyDiffusion(np.ones((2, 3, 1)))(0.0, x).shape == (3, 2, 3)
    c = PolyJump(np.ones((2, 4, 2)))(0.0, x, np.array([1.0, 2.0, -1.0]))
    assert c.shape == (3, 2, 4)
    assert c[1, 1, 0] == 2.0 * (1.0 - 1.0)


def test_constant_model_coefficients():
    model = constant_model(m=2, d=1, l=1, drift=[1.0, -1.0], sigma=0.5, jump=2.0)
    x = np.zeros((4, 2))
    np.testing.assert_array_equal(model.a(0, x), np.tile([1.0, -1.0], (4, 1)))
    np.testing.assert_array_equal(model.b(0, x), np.full((4, 2, 1), 0.5))
    np.testing.assert_array_equal(model.c(0, x, np.full(4, 3.0)), np.full((4, 2, 1), 6.0))


def test_gamma_tables():
    assert ConstantGamma((0.5, -0.25))(0.0, np.array([1.0, 2.0, 3.0])).shape == (3, 2)
    tab = TabulatedGamma((1.0, 2.0), np.array([[0.1, 0.2]]))
    np.testing.assert_array_equal(tab(0.0, np.array([2.0, 1.0])), [[0.2], [0.1]])
    with pytest.raises(ValueError):
        tab(0.0, np.array([5.0]))


def test_modulus_decay():
    assert Modulus(2.0, 1.0)(0.0) == 2.0
    assert Modulus(2.0, 1.0)(1.0) == pytest.approx(2 * np.exp(-1))


def test_term_generator_rejects_unknown_term():
    with pytest.raises(ConfigError, match="unknown generator term"):
        TermGenerator({"cube": 1.0})


def test_term_generator_values():
    f = TermGenerator({"const": 1.0, "y": -2.0, "z": [1.0, 3.0], "gamma": 0.5,
                       "abs_affine_x": [1.0, -1.0]})
    x = np.array([[2.0], [0.0]])
    y = np.array([1.0, -1.0])
    z = np.array([[1.0, 1.0], [0.0, -1.0]])
    g = np.array([2.0, 0.0])
    np.testing.assert_allclose(f(0.3, x, y, z, g), [1 - 2 + 4 + 1 + 1, 1 + 2 - 3 + 0 + 1])


def test_step_term_is_right_continuous():
    f = TermGenerator({"step": [0.5, 3.0]})
    args = (np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    assert f(0.4999, *args)[0] == 0.0 and f(0.5, *args)[0] == 3.0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_declared_slopes_bound_the_family(cy, cz, cg, cs):
    f = TermGenerator({"y": cy, "sin_y": cs, "z": cz, "gamma": cg})
    ly, lzu = f.slopes(1.0)
    rng = np.random.default_rng(0)
    x = np.zeros((50, 1))
    y1, y2 = rng.normal(size=(2, 50)) * 3
    z1, z2 = rng.normal(size=(2, 50, 1)) * 3
    g = rng.normal(size=50)
    dy = np.abs(f(0, x, y1, z1, g) - f(0, x, y2, z1, g))
    assert np.all(dy <= ly * np.abs(y1 - y2) + 1e-9)
    dz = np.abs(f(0, x, y1, z1, g) - f(0, x, y1, z2, g))
    assert np.all(dz <= lzu * np.abs(z1 - z2)[:, 0] + 1e-9)


def test_terminals():
    x = np.array([[1.0, 2.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(AffineTerminal(1.0, (2.0, -1.0))(x), [1.0, -1.0])
    np.testing.assert_array_equal(AbsTerminal(2.0, 0.5)(x), [1.0, 3.0])


def test_single_jump_zero_intensity_disables():
    assert not single_jump(1.0, 0.0).enabled
