"""Domain types for decoupled forward-backward SDEs with jumps.

Conventions for the user-supplied callables (all vectorised over paths):

* ``a(t, x)``: ``x`` of shape ``(n, m)`` -> ``(n, m)``
* ``b(t, x)``: ``(n, m)`` -> ``(n, m, d)``
* ``c(t, x, e)``: ``x`` ``(n, m)``, marks ``e`` ``(n,)`` -> ``(n, m, l)``
* ``gamma(t, e)``: marks ``(k,)`` -> ``(k, l)``
* ``f1(t, x, y, z, g)``: ``(n, m)``, ``(n,)``, ``(n, d)``, ``(n,)`` -> ``(n,)``
* ``h(x)``: ``(n, m)`` -> ``(n,)``
* ``u1(t)``, ``u2(t)``: scalar -> non-negative float

Time ``t`` is always a Python float. The backward component is scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ModelError

_NODE_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Time discretisation ``t_start = t_0 < ... < t_N = t_end``.

    Uniform unless ``nodes`` is passed explicitly.
    """

    t_start: float
    t_end: float
    n_steps: int
    nodes: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ModelError(f"n_steps must be a positive integer, got {self.n_steps}")
        if self.t_start < 0:
            raise ModelError(f"t_start must be >= 0, got {self.t_start}")
        if self.nodes is None:
            nodes = np.linspace(self.t_start, self.t_end, int(self.n_steps) + 1)
        else:
            nodes = np.asarray(self.nodes, dtype=float)
            if nodes.shape != (self.n_steps + 1,):
                raise ModelError("explicit nodes must have n_steps + 1 entries")
            if nodes[0] != self.t_start or nodes[-1] != self.t_end:
                raise ModelError("explicit nodes must start at t_start and end at t_end")
        if not np.all(np.diff(nodes) > 0):
            raise ModelError("time grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_nodes(cls, nodes) -> "TimeGrid":
        nodes = np.asarray(nodes, dtype=float)
        return cls(float(nodes[0]), float(nodes[-1]), len(nodes) - 1, nodes)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def horizon(self) -> float:
        return float(self.t_end - self.t_start)

    def index_of(self, t: float) -> int:
        """Index of the node equal to ``t``; raises if ``t`` is off-grid."""
        i = int(np.argmin(np.abs(self.nodes - t)))
        if abs(self.nodes[i] - t) > _NODE_ATOL * max(1.0, abs(t)):
            raise ModelError(f"time {t} is not a node of the grid")
        return i

    def floor_index(self, t: float) -> int:
        """Largest node index with ``nodes[i] <= t`` (up to rounding)."""
        tol = _NODE_ATOL * max(1.0, abs(t))
        return int(np.searchsorted(self.nodes, t + tol, side="right") - 1)

    def subgrid(self, start: int, stop: int) -> "TimeGrid":
        """Grid made of ``nodes[start:stop + 1]``."""
        if not 0 <= start < stop <= self.n_steps:
            raise ModelError(f"invalid subgrid [{start}, {stop}]")
        return TimeGrid.from_nodes(self.nodes[start : stop + 1])


@dataclass(frozen=True, eq=False)
class JumpMeasureSpec:
    """Finite-activity jump measure: a shared list of marks and, for each of
    the ``l`` Poisson components, one intensity per mark.

    ``intensities`` has shape ``(l, K)``. A component whose intensities are all
    zero never jumps; a measure with no marks disables the jump part.
    """

    marks: np.ndarray
    intensities: np.ndarray

    def __post_init__(self) -> None:
        marks = np.atleast_1d(np.asarray(self.marks, dtype=float))
        lam = np.asarray(self.intensities, dtype=float)
        if lam.ndim == 1:
            lam = lam[None, :]
        if lam.ndim != 2 or lam.shape[1] != marks.shape[0]:
            raise ModelError(
                f"intensities shape {lam.shape} does not match {marks.shape[0]} marks"
            )
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ModelError("intensities must be finite and non-negative")
        if not np.all(np.isfinite(marks)):
            raise ModelError("marks must be finite")
        marks.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "intensities", lam)

    @classmethod
    def none(cls, l: int = 1) -> "JumpMeasureSpec":
        return cls(np.zeros(0), np.zeros((l, 0)))

    @property
    def l(self) -> int:
        return self.intensities.shape[0]

    @property
    def n_marks(self) -> int:
        return self.marks.shape[0]

    @property
    def component_rates(self) -> np.ndarray:
        """Total intensity per component, shape ``(l,)``."""
        return self.intensities.sum(axis=1)

    @property
    def total_intensity(self) -> float:
        return float(self.intensities.sum())

    @property
    def enabled(self) -> bool:
        return self.total_intensity > 0


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """Coefficients of the forward jump-diffusion started at ``(t0, x0)``."""

    dim_x: int
    dim_w: int
    a: Callable
    b: Callable
    c: Callable
    x0: np.ndarray
    t0: float = 0.0
    lipschitz_x: float | None = None

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.dim_x,):
            raise ModelError(f"x0 has shape {x0.shape}, expected ({self.dim_x},)")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    def started_at(self, t0: float, x0) -> "ForwardModel":
        return ForwardModel(
            self.dim_x, self.dim_w, self.a, self.b, self.c, np.asarray(x0, float),
            float(t0), self.lipschitz_x,
        )


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Driver ``f1(t, x, y, z, Gamma)`` where ``Gamma`` is the jump kernel
    integrated against ``gamma * lambda``, together with the declared
    Lipschitz moduli ``u1`` (in y) and ``u2`` (in z and the jump kernel)."""

    f1: Callable
    gamma: Callable
    u1: Callable
    u2: Callable
    name: str = "generator"


@dataclass(frozen=True, eq=False)
class TerminalSpec:
    h: Callable
    growth_constant: float
    name: str = "terminal"


@dataclass(frozen=True)
class StoppingRule:
    """Exit time of the ball of radius ``eta`` around ``anchor_x`` after
    ``anchor_t``, capped at ``anchor_t + min(eta, delta)``."""

    eta: float
    delta: float
    anchor_t: float
    anchor_x: tuple

    def __post_init__(self) -> None:
        for name in ("eta", "delta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be finite and positive, got {v}")
        object.__setattr__(
            self, "anchor_x", tuple(float(v) for v in np.atleast_1d(self.anchor_x))
        )

    @property
    def cap_time(self) -> float:
        return self.anchor_t + min(self.eta, self.delta)


# --------------------------------------------------------------------------
# evaluation helpers


def eval_gamma(gen: GeneratorSpec, t: float, marks: np.ndarray, l: int) -> np.ndarray:
    """``gamma_t(e_k)`` for every mark, shape ``(K, l)``."""
    marks = np.asarray(marks, dtype=float)
    if marks.size == 0:
        return np.zeros((0, l))
    g = np.asarray(gen.gamma(t, marks), dtype=float)
    return np.broadcast_to(g.reshape(marks.shape[0], -1), (marks.shape[0], l))


def gamma_l2_norm_sq(gen: GeneratorSpec, measure: JumpMeasureSpec, t: float) -> float:
    """``sum_i sum_k |gamma^i_t(e_k)|^2 lambda^i_k``."""
    g = eval_gamma(gen, t, measure.marks, measure.l)
    return float(np.sum(g.T**2 * measure.intensities))


def _modulus(fn: Callable, t: float) -> float:
    return float(np.asarray(fn(t), dtype=float))


# --------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    witness: Any = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "witness": self.witness,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def sample_states(x0: np.ndarray, radius: float, n_random: int, seed: int) -> np.ndarray:
    """Deterministic witness set: the axis points ``x0 +/- r e_j`` for a ladder
    of radii up to ``radius``, followed by uniform draws in the box."""
    x0 = np.asarray(x0, dtype=float)
    m = x0.shape[0]
    pts = [x0[None, :]]
    for r in np.linspace(radius, radius / 8, 8):
        for sign in (1.0, -1.0):
            pts.append(x0 + sign * r * np.eye(m))
    rng = np.random.default_rng(seed)
    pts.append(x0 + rng.uniform(-radius, radius, size=(n_random, m)))
    return np.concatenate(pts, axis=0)


def _evaluate(name: str, fn: Callable, t: float, *args) -> np.ndarray:
    try:
        out = np.asarray(fn(t, *args), dtype=float)
    except Exception as exc:  # noqa: BLE001 - surface any user-code failure
        raise ModelError(f"coefficient evaluation error in {name} at t={t}: {exc}") from exc
    return out


def validate_model(
    model: ForwardModel,
    gen: GeneratorSpec,
    term: TerminalSpec,
    grid: TimeGrid,
    measure: JumpMeasureSpec | None = None,
    *,
    domain_radius: float = 3.0,
    n_samples: int = 256,
    seed: int = 0,
) -> ValidationReport:
    """Check every model invariant on a sampled witness set.

    Raises :class:`ModelError` when a coefficient cannot be evaluated; every
    other violation is reported as a failed check with its witness point.
    """
    measure = measure if measure is not None else JumpMeasureSpec.none()
    m, d, l = model.dim_x, model.dim_w, measure.l
    xs = sample_states(model.x0, domain_radius, n_samples, seed)
    n = xs.shape[0]
    checks: list[Check] = []

    checks.append(Check("grid", bool(np.all(grid.dt > 0)) and grid.n_steps >= 1))

    # forward coefficients: shape and finiteness on (node, state) samples
    bad = None
    t_samples = grid.nodes[:: max(1, grid.n_steps // 8)]
    for t in t_samples:
        t = float(t)
        outs = {
            "a": (_evaluate("a", model.a, t, xs), (n, m)),
            "b": (_evaluate("b", model.b, t, xs), (n, m, d)),
        }
        for k, e in enumerate(measure.marks):
            outs[f"c[e={e}]"] = (
                _evaluate("c", model.c, t, xs, np.full(n, e)),
                (n, m, l),
            )
        for name, (val, shape) in outs.items():
            if val.shape != shape:
                raise ModelError(
                    f"coefficient evaluation error in {name} at t={t}: "
                    f"shape {val.shape}, expected {shape}"
                )
            finite = np.isfinite(val.reshape(n, -1)).all(axis=1)
            if bad is None and not finite.all():
                bad = {"coefficient": name, "t": t, "x": xs[np.argmin(finite)].tolist()}
    checks.append(Check("coefficients_finite", bad is None, bad))

    if model.lipschitz_x is not None:
        checks.append(_forward_lipschitz(model, measure, grid, xs, seed))

    # generator structure on the finite mark set
    witness = None
    worst_norm = None
    for t in grid.nodes:
        t = float(t)
        g = eval_gamma(gen, t, measure.marks, l)
        if g.size and witness is None and g.min() < -1:
            k, i = np.unravel_index(np.argmin(g), g.shape)
            witness = {"t": t, "mark": float(measure.marks[k]), "component": int(i),
                       "gamma": float(g[k, i])}
        norm_sq = float(np.sum(g.T**2 * measure.intensities))
        u2 = _modulus(gen.u2, t)
        if norm_sq > u2**2 * (1 + 1e-12) + 1e-300 and worst_norm is None:
            worst_norm = {"t": t, "gamma_norm_sq": norm_sq, "u2_sq": u2**2}
    checks.append(Check("A4_gamma_lower_bound", witness is None, witness,
                        "gamma components must be >= -1"))
    checks.append(Check("A4_gamma_norm", worst_norm is None, worst_norm,
                        "sum |gamma|^2 lambda <= u2^2"))

    u1 = np.array([_modulus(gen.u1, float(t)) for t in grid.nodes])
    u2 = np.array([_modulus(gen.u2, float(t)) for t in grid.nodes])
    neg = np.flatnonzero((u1 < 0) | (u2 < 0))
    checks.append(Check(
        "moduli_nonnegative", neg.size == 0,
        None if neg.size == 0 else {"t": float(grid.nodes[neg[0]])},
    ))
    integral = float(np.sum(grid.dt * 0.5 * ((u1 + u2**2)[1:] + (u1 + u2**2)[:-1])))
    checks.append(Check("moduli_integrable", bool(np.isfinite(integral)), None,
                        f"truncated integral of u1 + u2^2 = {integral!r}"))

    # terminal growth |h(x)| <= C (1 + |x|)
    try:
        hv = np.asarray(term.h(xs), dtype=float)
    except Exception as exc:  # noqa: BLE001
        raise ModelError(f"coefficient evaluation error in h: {exc}") from exc
    excess = np.abs(hv) - term.growth_constant * (1 + np.linalg.norm(xs, axis=1))
    excess = np.where(np.isfinite(excess), excess, np.inf)
    j = int(np.argmax(excess))
    ok = bool(excess[j] <= 1e-12)
    checks.append(Check(
        "terminal_growth", ok,
        None if ok else {"x": xs[j].tolist(), "h": float(hv[j]),
                         "bound": float(term.growth_constant * (1 + np.linalg.norm(xs[j])))},
    ))
    return ValidationReport(checks)


def _forward_lipschitz(model, measure, grid, xs, seed) -> Check:
    """Sampled slope quotients of a, b, c in x against the declared bound."""
    rng = np.random.default_rng(seed + 1)
    n, m = xs.shape
    dx = rng.normal(size=(n, m)) * 10.0 ** rng.uniform(-4, 0, size=(n, 1))
    ys = xs + dx
    dist = np.linalg.norm(dx, axis=1)
    worst = 0.0
    t = float(grid.nodes[0])
    pairs = [(model.a(t, xs), model.a(t, ys)), (model.b(t, xs), model.b(t, ys))]
    for e in measure.marks:
        es = np.full(n, e)
        pairs.append((model.c(t, xs, es), model.c(t, ys, es)))
    for u, v in pairs:
        diff = np.linalg.norm((np.asarray(u) - np.asarray(v)).reshape(n, -1), axis=1)
        worst = max(worst, float(np.max(diff / dist)))
    ok = worst <= model.lipschitz_x * 1.05
    return Check("forward_lipschitz_x", ok, {"max_slope": worst},
                 f"declared {model.lipschitz_x}")
