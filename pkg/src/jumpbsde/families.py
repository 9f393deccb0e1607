"""Small closed families of coefficients, generators and terminals.

Everything a config file can express lives here: per-coordinate polynomial
tables for the forward coefficients, a linear combination of named terms for
the driver, constant or tabulated jump weights, and a handful of terminal
functions. Every object is a picklable callable with the vectorised
signatures documented in :mod:`jumpbsde.model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import ForwardModel, GeneratorSpec, JumpMeasureSpec, TerminalSpec


def _powers(x: np.ndarray, degree: int) -> np.ndarray:
    # (n, m) -> (n, m, degree + 1)
    return x[..., None] ** np.arange(degree + 1)


@dataclass(frozen=True, eq=False)
class PolyDrift:
    """``a_j(x) = sum_k A[j, k] x_j^k``; ``table`` has shape ``(m, K)``."""

    table: np.ndarray

    def __call__(self, t, x):
        tab = np.asarray(self.table, float)
        return np.einsum("nmk,mk->nm", _powers(x, tab.shape[-1] - 1), tab)


@dataclass(frozen=True, eq=False)
class PolyDiffusion:
    """``b_jq(x) = sum_k B[j, q, k] x_j^k``; ``table`` is ``(m, d, K)``."""

    table: np.ndarray

    def __call__(self, t, x):
        tab = np.asarray(self.table, float)
        return np.einsum("nmk,mqk->nmq", _powers(x, tab.shape[-1] - 1), tab)


@dataclass(frozen=True, eq=False)
class PolyJump:
    """``c_ji(x, e) = e * sum_k C[j, i, k] x_j^k``; ``table`` is ``(m, l, K)``."""

    table: np.ndarray

    def __call__(self, t, x, e):
        tab = np.asarray(self.table, float)
        base = np.einsum("nmk,mik->nmi", _powers(x, tab.shape[-1] - 1), tab)
        return base * np.asarray(e, float).reshape(-1, 1, 1)


# --------------------------------------------------------------------------
# jump weights and moduli


@dataclass(frozen=True, eq=False)
class ConstantGamma:
    """``gamma^i_t(e) = values[i]`` for every mark."""

    values: tuple

    def __call__(self, t, e):
        e = np.atleast_1d(np.asarray(e, float))
        return np.broadcast_to(np.asarray(self.values, float), (e.shape[0], len(self.values))).copy()


@dataclass(frozen=True, eq=False)
class TabulatedGamma:
    """``gamma^i_t(e_k) = table[i, k]`` looked up by exact mark value."""

    marks: tuple
    table: np.ndarray

    def __call__(self, t, e):
        e = np.atleast_1d(np.asarray(e, float))
        marks = np.asarray(self.marks, float)
        idx = np.array([int(np.flatnonzero(marks == v)[0]) if np.any(marks == v) else -1
                        for v in e], dtype=int)
        if np.any(idx < 0):
            raise ValueError(f"mark(s) {e[idx < 0]} not in gamma table")
        return np.asarray(self.table, float)[:, idx].T


@dataclass(frozen=True)
class Modulus:
    """``u(t) = scale * exp(-rate * t)``."""

    scale: float
    rate: float = 0.0

    def __call__(self, t):
        return self.scale * np.exp(-self.rate * np.asarray(t, float))


# --------------------------------------------------------------------------
# driver: linear combination of named terms

_SCALAR_TERMS = {
    "const", "t", "t2", "inv_t", "y", "abs_y", "sin_y", "gamma", "sin_gamma",
}
_VECTOR_TERMS = {"x": "m", "x2": "m", "z": "d", "sin_z": "d", "abs_z": "d"}
_TABLE_TERMS = {"step", "abs_affine_x"}
GENERATOR_TERMS = sorted(_SCALAR_TERMS | set(_VECTOR_TERMS) | _TABLE_TERMS)


@dataclass(frozen=True, eq=False)
class TermGenerator:
    """``f1 = sum over terms of coefficient * basis term``.

    Scalar terms: ``const, t, t2, inv_t (1/t), y, abs_y, sin_y, gamma (Gamma),
    sin_gamma``. Vector terms take one coefficient per coordinate (a scalar is
    broadcast): ``x, x2`` over state coordinates, ``z, sin_z, abs_z`` over
    Brownian coordinates. Table terms: ``step = [at, size]`` adds ``size`` for
    ``t >= at``; ``abs_affine_x = [p, q_1..q_m]`` adds ``|p + q . x|``.
    """

    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.terms) - set(GENERATOR_TERMS)
        if unknown:
            raise ConfigError(f"unknown generator term(s): {sorted(unknown)}")

    def __call__(self, t, x, y, z, g):
        t = np.float64(t)
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        z = np.asarray(z, float)
        g = np.asarray(g, float)
        out = np.zeros(np.broadcast(y, g).shape)
        T = self.terms
        if "const" in T:
            out = out + T["const"]
        if "t" in T:
            out = out + T["t"] * t
        if "t2" in T:
            out = out + T["t2"] * t * t
        if "inv_t" in T:
            out = out + T["inv_t"] / t
        if "step" in T:
            at, size = T["step"]
            out = out + (size if t >= at else 0.0)
        if "y" in T:
            out = out + T["y"] * y
        if "abs_y" in T:
            out = out + T["abs_y"] * np.abs(y)
        if "sin_y" in T:
            out = out + T["sin_y"] * np.sin(y)
        if "gamma" in T:
            out = out + T["gamma"] * g
        if "sin_gamma" in T:
            out = out + T["sin_gamma"] * np.sin(g)
        if "x" in T:
            out = out + x @ np.broadcast_to(np.asarray(T["x"], float), x.shape[-1:])
        if "x2" in T:
            out = out + (x * x) @ np.broadcast_to(np.asarray(T["x2"], float), x.shape[-1:])
        if "abs_affine_x" in T:
            p, *q = T["abs_affine_x"]
            out = out + np.abs(p + x @ np.broadcast_to(np.asarray(q, float), x.shape[-1:]))
        for name, fn in (("z", None), ("sin_z", np.sin), ("abs_z", np.abs)):
            if name in T:
                w = np.broadcast_to(np.asarray(T[name], float), z.shape[-1:])
                out = out + (z if fn is None else fn(z)) @ w
        return out

    def slopes(self, measure_norm: float = 1.0) -> tuple[float, float]:
        """Global Lipschitz constants ``(in y, in (z, U))`` of this family.

        ``measure_norm`` is ``sqrt(sum |gamma|^2 lambda)``, the factor that
        converts a slope in ``Gamma`` into a slope in the jump kernel.
        """
        T = self.terms
        ly = abs(T.get("y", 0.0)) + abs(T.get("abs_y", 0.0)) + abs(T.get("sin_y", 0.0))
        lz = sum(
            float(np.sum(np.abs(np.asarray(T.get(k, 0.0), float)))) for k in ("z", "sin_z", "abs_z")
        )
        lg = abs(T.get("gamma", 0.0)) + abs(T.get("sin_gamma", 0.0))
        return ly, max(lz, lg * measure_norm)


# --------------------------------------------------------------------------
# terminals


@dataclass(frozen=True, eq=False)
class AffineTerminal:
    """``h(x) = intercept + weights . x``."""

    intercept: float = 0.0
    weights: tuple = (1.0,)

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.intercept + x @ np.broadcast_to(np.asarray(self.weights, float), x.shape[-1:])


@dataclass(frozen=True, eq=False)
class QuadraticTerminal:
    """``h(x) = coef * |x|^2``."""

    coef: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.coef * np.sum(x * x, axis=-1)


@dataclass(frozen=True, eq=False)
class AbsTerminal:
    """``h(x) = scale * |x - strike|`` on the first coordinate."""

    scale: float = 1.0
    strike: float = 0.0

    def __call__(self, x):
        return self.scale * np.abs(np.asarray(x, float)[..., 0] - self.strike)


# --------------------------------------------------------------------------
# presets


def constant_model(m: int = 1, d: int = 1, l: int = 1, *, drift=0.0, sigma=0.0,
                   jump=0.0, x0=0.0, t0: float = 0.0) -> ForwardModel:
    """Model with constant (state independent) coefficients.

    ``c(t, x, e) = jump * e``; scalars broadcast to the full tables.
    """
    a = np.broadcast_to(np.asarray(drift, float), (m,)).reshape(m, 1)
    b =np.broadcast_to(np.asarray(sigma, float), (m, d) if np.ndim(sigma) < 2 else np.shape(sigma))
    c = np.broadcast_to(np.asarray(jump, float), (m, l) if np.ndim(jump) < 2 else np.shape(jump))
    return ForwardModel(
        m, d, PolyDrift(np.asarray(a, float)), PolyDiffusion(np.asarray(b, float)[..., None]),
        PolyJump(np.asarray(c, float)[..., None]), np.broadcast_to(np.asarray(x0, float), (m,)),
        t0, lipschitz_x=0.0,
    )


def single_jump(mark: float = 1.0, intensity: float = 1.0) -> JumpMeasureSpec:
    if intensity == 0:
        return JumpMeasureSpec.none(1)
    return JumpMeasureSpec(np.array([mark]), np.array([[intensity]]))


def term_generator(terms: dict, *, gamma=(0.0,), u1=None, u2=None,
                   measure: JumpMeasureSpec | None = None, name: str = "") -> GeneratorSpec:
    """Build a :class:`GeneratorSpec` from a term table.

    Moduli default to the family's exact global slopes (constants in t).
    """
    f1 = TermGenerator(dict(terms))
    gam = ConstantGamma(tuple(np.atleast_1d(np.asarray(gamma, float)).tolist()))
    norm = 0.0
    if measure is not None and measure.n_marks:
        g = gam(0.0, measure.marks)
        norm = float(np.sqrt(np.sum(g.T**2 * measure.intensities)))
    ly, lzu = f1.slopes(norm)
    u1 = Modulus(ly) if u1 is None else (u1 if callable(u1) else Modulus(float(u1)))
    u2 = Modulus(max(lzu, norm)) if u2 is None else (u2 if callable(u2) else Modulus(float(u2)))
    return GeneratorSpec(f1, gam, u1, u2, name or _describe(terms))


def _describe(terms: dict) -> str:
    if not terms:
        return "zero"
    return " + ".join(f"{v}*{k}" for k, v in terms.items())


def zero_generator(**kw) -> GeneratorSpec:
    return term_generator({}, name="zero", **kw)


def constant_generator(k: float, **kw) -> GeneratorSpec:
    return term_generator({"const": k}, name=f"const({k})", **kw)


def linear_ode_generator(rho: float, **kw) -> GeneratorSpec:
    return term_generator({"y": -rho}, name=f"linear_ode({rho})", **kw)


def identity_terminal(m: int = 1) -> TerminalSpec:
    w = (1.0,) + (0.0,) * (m - 1)
    return TerminalSpec(AffineTerminal(0.0, w), 1.0, "identity")


def constant_terminal(k: float) -> TerminalSpec:
    return TerminalSpec(AffineTerminal(k, (0.0,)), abs(k), f"constant({k})")
