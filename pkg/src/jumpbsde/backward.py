"""Backward regression scheme for the BSDE with jumps and the Markovian
representation ``Y = u(t, X)``, ``Z = chi(t, X)``, ``Gamma = zeta(t, X)``.

On each step, with ``E_i`` the regression on the state at node ``i``::

    Yhat_i  = E_i[Y_{i+1}]
    Z_i     = E_i[(Y_{i+1} - Yhat_i) dW_i] / dt_i
    Gamma_i = E_i[(Y_{i+1} - Yhat_i) M_i] / dt_i
    Y_i     = Yhat_i + f1(t_i, X_i, Yhat_i, Z_i, Gamma_i) dt_i

where ``M_i`` is the compensated increment of ``int gamma dmu`` over the step.
Paths whose stopping node is ``<= i`` keep their terminal value with
``Z = Gamma = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssumptionError, GeneratorError, ModelError, RegressionError
from .model import ForwardModel, GeneratorSpec, JumpMeasureSpec, TimeGrid, eval_gamma
from .paths import PathBundle, compensated_gamma_increments
from .regression import NodeFit, RegressionBasis


def _exact_mean(v: np.ndarray) -> float:
    # np.mean of n copies of c need not return c
    return float(v[0]) if np.ptp(v) == 0 else float(np.mean(v))


@dataclass
class ValueEstimate:
    value: np.ndarray
    extrapolated: np.ndarray

    @property
    def any_extrapolated(self) -> bool:
        return bool(self.extrapolated.any())


@dataclass(eq=False)
class BackwardSolution:
    grid: TimeGrid
    Y: np.ndarray  # (n_paths, N + 1)
    Z: np.ndarray  # (n_paths, N + 1, d)
    Gamma: np.ndarray  # (n_paths, N + 1)
    stop: np.ndarray  # per-path terminal node
    realized: np.ndarray  # xi + sum of f1 dt along each path
    fits_cont: list  # NodeFit | None per node < N, for Yhat
    fits_zg: list  # NodeFit | None per node < N, for (Z dt, Gamma dt)
    generator: GeneratorSpec
    terminal_fn: Callable | None = None

    @property
    def n_paths(self) -> int:
        return self.Y.shape[0]

    @property
    def y0(self) -> float:
        return _exact_mean(self.Y[:, 0])

    @property
    def se(self) -> float:
        """Standard error of ``y0`` from the pathwise realised values
        ``xi + sum_i f1(...) dt_i``."""
        if self.n_paths < 2:
            return float("nan")
        return float(np.std(self.realized, ddof=1) / np.sqrt(self.n_paths))

    @property
    def z0(self) -> np.ndarray:
        return np.array([_exact_mean(self.Z[:, 0, q]) for q in range(self.Z.shape[2])])

    @property
    def gamma0(self) -> float:
        return _exact_mean(self.Gamma[:, 0])

    # -- Markovian representation -----------------------------------------

    def node_functions(self, i: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(u, chi, zeta, in_cloud)`` at node ``i`` for states ``x`` (n, m).

        A degenerate node (all active paths at one point ``xbar``, typically
        the initial node) is extended off ``xbar`` with the shape of the next
        non-degenerate surface: ``Yhat_i + u_j(x) - u_j(xbar)``. At ``xbar``
        this returns the plain Monte Carlo value.
        """
        x = np.atleast_2d(np.asarray(x, float))
        N = self.grid.n_steps
        d = self.Z.shape[2]
        if i == N:
            if self.terminal_fn is None:
                raise ModelError("terminal function not attached to this solution")
            n = x.shape[0]
            return (np.asarray(self.terminal_fn(x), float), np.zeros((n, d)), np.zeros(n),
                    np.ones(n, dtype=bool))
        fc, fzg = self.fits_cont[i], self.fits_zg[i]
        if fc is None:
            raise ModelError(f"no active paths at node {i}")
        dt = float(self.grid.nodes[i + 1] - self.grid.nodes[i])
        t = float(self.grid.nodes[i])
        if not fc.degenerate:
            cont = fc.predict(x)[:, 0]
            inside = fc.in_cloud(x)
        else:
            j = i + 1
            while j < N and self.fits_cont[j] is not None and self.fits_cont[j].degenerate:
                j += 1
            xbar = fc.mean[None, :]
            u_x, _, _, inside_j = self.node_functions(j, x)
            u_bar = self.node_functions(j, xbar)[0][0]
            cont = fc.coef[0, 0] + (u_x - u_bar)
            inside = inside_j | np.all(x == xbar, axis=1)
        zg = fzg.predict(x) / dt
        z, g = zg[:, :d], zg[:, d]
        f = np.asarray(self.generator.f1(t, x, cont, z, g), float)
        return cont + f * dt, z, g, inside

    def value_function(self, t: float, x) -> ValueEstimate:
        u, _, _, inside = self.node_functions(self.grid.index_of(t), x)
        return ValueEstimate(u, ~inside)

    def as_function(self) -> Callable:
        """``u(t, x)`` for grid times ``t``; usable by the Feynman-Kac helpers."""
        return lambda t, x: self.node_functions(self.grid.index_of(t), x)[0]


def value_function(solution: BackwardSolution, t: float, x) -> ValueEstimate:
    return solution.value_function(t, x)


def solve_backward(
    bundle: PathBundle,
    gen: GeneratorSpec,
    measure: JumpMeasureSpec,
    terminal,
    basis: RegressionBasis | None = None,
    *,
    stop: np.ndarray | None = None,
    terminal_fn: Callable | None = None,
    certificate=None,
) -> BackwardSolution:
    """Solve the BSDE backward on ``bundle``.

    Args:
        terminal: pathwise terminal values ``xi`` (n_paths,), attained at node
            ``stop[p]`` (default: the last node).
        stop: per-path terminal node indices, e.g. from ``hitting_time``.
        terminal_fn: optional ``h(x)`` kept for evaluating ``u`` at the last node.
        certificate: an audit report; if given and not passing the solve is refused.
    """
    if certificate is not None and not certificate.passed:
        raise AssumptionError(f"generator refused: failed {certificate.failed_names()}")
    basis = basis or RegressionBasis()
    grid = bundle.grid
    N, n = grid.n_steps, bundle.n_paths
    d = bundle.brownian_increments.shape[2]
    xi = np.asarray(terminal, float).reshape(-1)
    if xi.shape != (n,):
        raise ModelError(f"terminal has shape {xi.shape}, expected ({n},)")
    if not np.isfinite(xi).all() or not np.isfinite(np.sum(xi * xi)):
        raise ModelError("terminal values must be finite and square-summable")
    stop = np.full(n, N, dtype=int) if stop is None else np.asarray(stop, dtype=int)
    if stop.shape != (n,) or stop.min() < 0 or stop.max() > N:
        raise ModelError("stop indices must lie on the grid")

    M = compensated_gamma_increments(bundle, gen.gamma, measure)
    X, dW = bundle.states, bundle.brownian_increments
    Y = np.empty((n, N + 1))
    Z = np.zeros((n, N + 1, d))
    G = np.zeros((n, N + 1))
    Y[:] = xi[:, None]  # frozen after stopping; overwritten before it
    realized = xi.copy()
    fits_cont: list[NodeFit | None] = [None] * N
    fits_zg: list[NodeFit | None] = [None] * N

    for i in range(N - 1, -1, -1):
        act = np.flatnonzero(stop > i)
        if act.size == 0:
            continue
        t = float(grid.nodes[i])
        dt = float(grid.nodes[i + 1] - grid.nodes[i])
        x = X[act, i]
        y_next = Y[act, i + 1]
        fc = basis.fit(x, y_next, label=f"at node {i}")
        cont = fc.predict(x)[:, 0] if not fc.degenerate else np.full(act.size, fc.coef[0, 0])
        dy = y_next - cont
        resp = np.column_stack([dy[:, None] * dW[act, i], dy * M[act, i]])
        fzg = basis.fit(x, resp, label=f"at node {i}")
        zg = fzg.predict(x) / dt
        z, g = zg[:, :d], zg[:, d]
        f = np.asarray(gen.f1(t, x, cont, z, g), float)
        if f.shape != (act.size,):
            f = np.broadcast_to(f, (act.size,)).copy()
        if not np.isfinite(f).all():
            p = int(act[np.argmin(np.isfinite(f))])
            raise GeneratorError(f"non-finite generator value at (node {i}, path {p})")
        Y[act, i] = cont + f * dt
        Z[act, i] = z
        G[act, i] = g
        realized[act] += f * dt
        fits_cont[i], fits_zg[i] = fc, fzg
        if not np.isfinite(Y[act, i]).all():
            raise RegressionError(f"non-finite Y at node {i}")

    return BackwardSolution(grid, Y, Z, G, stop, realized, fits_cont, fits_zg, gen, terminal_fn)


# --------------------------------------------------------------------------
# Feynman-Kac quantities


def fd_step(x: np.ndarray) -> np.ndarray:
    return np.maximum(1e-4, 1e-4 * np.abs(x))


def feynman_kac_z(u: Callable, model: ForwardModel, t: float, x, h_fd=None) -> np.ndarray:
    """``chi(t, x) = grad_x u(t, x)^T b(t, x)`` by central differences.

    Returns shape ``(d,)``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    m = x.shape[0]
    h = fd_step(x) if h_fd is None else np.broadcast_to(np.asarray(h_fd, float), (m,))
    pts = np.concatenate([x + np.diag(h), x - np.diag(h)])
    vals = np.asarray(u(t, pts), float)
    grad = (vals[:m] - vals[m:]) / (2 * h)
    b = np.asarray(model.b(t, x[None, :]), float)[0]
    return grad @ b


def feynman_kac_u(
    u: Callable, model: ForwardModel, gen: GeneratorSpec, measure: JumpMeasureSpec, t: float, x
) -> float:
    """``zeta(t, x) = sum_{i,k} (u(t, x + c^i(t, x, e_k)) - u(t, x)) gamma^i_t(e_k) lambda^i_k``."""
    x = np.atleast_1d(np.asarray(x, float))
    K, l = measure.n_marks, measure.l
    if K == 0:
        return 0.0
    c = np.asarray(model.c(t, np.repeat(x[None, :], K, axis=0), measure.marks), float)  # (K, m, l)
    shifted = x[None, None, :] + np.transpose(c, (0, 2, 1))  # (K, l, m)
    vals = np.asarray(u(t, np.concatenate([x[None, :], shifted.reshape(K * l, -1)])), float)
    diff = (vals[1:] - vals[0]).reshape(K, l)
    g = eval_gamma(gen, t, measure.marks, l)
    return float(np.sum(diff * g * measure.intensities.T))


# --------------------------------------------------------------------------
# closed-form oracles

ORACLES = ("zero_driver_martingale", "constant_driver", "linear_ode", "gamma_driver")


def closed_form_oracle(name: str, **params) -> Callable:
    """Exact ``(Y, Z, Gamma)`` as functions of ``(t, x)`` for solvable cases.

    * ``zero_driver_martingale``: f1 = 0, h(x) = x, forward a = 0, b = sigma,
      c = jump * e. ``Y = x``, ``Z = sigma``, ``Gamma = jump * sum gamma e lambda``.
    * ``constant_driver``: f1 = k, h = xi. ``Y = xi + k (T - t)``.
    * ``linear_ode``: f1 = -rho y, h = xi. ``Y = xi exp(-rho (T - t))``.
    * ``gamma_driver``: f1 = Gamma, h(x) = x, constant jump ``c = jump * e``
      with one mark. ``Gamma = jump * mark * gamma * lambda``, ``Y = x + Gamma (T - t)``.
    """
    if name == "zero_driver_martingale":
        sigma = params.get("sigma", 1.0)
        gam = params.get("jump", 0.0) * params.get("mark", 1.0) * params.get("gamma", 0.0) \
            * params.get("intensity", 0.0)

        def fn(t, x):
            x = np.asarray(x, float)
            return x, np.full_like(x, sigma), np.full_like(x, gam)
    elif name == "constant_driver":
        k, T, xi = params.get("k", 1.0), params.get("T", 1.0), params.get("xi", 0.0)

        def fn(t, x):
            x = np.asarray(x, float)
            return np.full_like(x, xi + k * (T - t)), np.zeros_like(x), np.zeros_like(x)
    elif name == "linear_ode":
        rho, T, xi = params.get("rho", 0.5), params.get("T", 1.0), params.get("xi", 1.0)

        def fn(t, x):
            x = np.asarray(x, float)
            return np.full_like(x, xi * np.exp(-rho * (T - t))), np.zeros_like(x), np.zeros_like(x)
    elif name == "gamma_driver":
        T = params.get("T", 1.0)
        gam = params.get("jump", 1.0) * params.get("mark", 1.0) * params.get("gamma", 1.0) \
            * params.get("intensity", 1.0)
        sigma = params.get("sigma", 0.0)

        def fn(t, x):
            x = np.asarray(x, float)
            return x + gam * (T - t), np.full_like(x, sigma), np.full_like(x, gam)
    else:
        raise ValueError(f"unknown oracle {name!r}; known: {', '.join(ORACLES)}")
    return fn
