"""Brownian increments, Poisson jump events and the Euler scheme for the
forward jump-diffusion, plus discrete hitting times.

Randomness is drawn per path from :mod:`jumpbsde.rng` streams (optionally on
a thread pool); the Euler recursion itself is vectorised across paths in a
single pass, so neither the draws nor the arithmetic depend on ``workers``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, SimulationError
from .model import ForwardModel, JumpMeasureSpec, StoppingRule, TimeGrid
from .rng import BROWNIAN, JUMPS, path_generator, stream_tag

EXPLOSION_BOUND = 1e150


@dataclass(frozen=True)
class JumpEvent:
    """One atom of the Poisson random measure on a path.

    ``component`` and ``mark_index`` are 0-based. ``pre_state`` is the left
    limit of the forward state at the jump (``None`` before simulation).
    """

    time: float
    component: int
    mark_index: int
    pre_state: tuple | None = None


@dataclass(frozen=True, eq=False)
class EventTable:
    """All jump events of a bundle as flat arrays, sorted by (path, time)."""

    path: np.ndarray
    time: np.ndarray
    component: np.ndarray
    mark_index: np.ndarray
    step: np.ndarray
    pre_state: np.ndarray  # (E, m); NaN until the forward pass fills it
    n_paths: int

    def __len__(self) -> int:
        return self.path.shape[0]

    def _bounds(self, p: int) -> tuple[int, int]:
        return (int(np.searchsorted(self.path, p, "left")),
                int(np.searchsorted(self.path, p, "right")))

    def for_path(self, p: int) -> list[JumpEvent]:
        lo, hi = self._bounds(p)
        out = []
        for j in range(lo, hi):
            pre = self.pre_state[j]
            out.append(JumpEvent(
                float(self.time[j]), int(self.component[j]), int(self.mark_index[j]),
                None if np.isnan(pre).any() else tuple(pre.tolist()),
            ))
        return out

    def per_path(self) -> list[list[JumpEvent]]:
        return [self.for_path(p) for p in range(self.n_paths)]

    def counts(self, l: int) -> np.ndarray:
        """Number of events per path and component, shape ``(n_paths, l)``."""
        out = np.zeros((self.n_paths, l), dtype=int)
        np.add.at(out, (self.path, self.component), 1)
        return out


@dataclass(frozen=True, eq=False)
class PathBundle:
    grid: TimeGrid
    n_paths: int
    brownian_increments: np.ndarray  # (n_paths, N, d)
    events: EventTable
    states: np.ndarray  # (n_paths, N + 1, m)
    seed: int
    stream: int = 0


def _chunks(n: int, workers: int) -> list[range]:
    workers = max(1, min(int(workers), n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [range(bounds[k], bounds[k + 1]) for k in range(workers)]


def _run_chunked(fn, n: int, workers: int) -> list:
    """``[fn(p) for p in range(n)]`` evaluated on a thread pool, in order."""
    chunks = _chunks(n, workers)
    if len(chunks) <= 1:
        return [fn(p) for p in range(n)]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(lambda r: [fn(p) for p in r], chunks)
        return [item for part in parts for item in part]


def _events_one_path(measure: JumpMeasureSpec, grid: TimeGrid, seed: int, p: int, tag: int):
    rng = path_generator(seed, p, tag)
    horizon = grid.horizon
    times, comps, marks = [], [], []
    for i, rate in enumerate(measure.component_rates):
        if rate <= 0:
            continue
        n = int(rng.poisson(rate * horizon))
        if n == 0:
            continue
        # t_end - H*U with U in [0, 1) lands in (t_start, t_end]
        times.append(grid.t_end - horizon * rng.random(n))
        comps.append(np.full(n, i))
        marks.append(rng.choice(measure.n_marks, size=n, p=measure.intensities[i] / rate))
    if not times:
        return np.zeros(0), np.zeros(0, int), np.zeros(0, int)
    t = np.concatenate(times)
    c = np.concatenate(comps)
    k = np.concatenate(marks)
    order = np.lexsort((c, t))
    return t[order], c[order], k[order]


def sample_jump_events(
    measure: JumpMeasureSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    m: int = 1,
    stream: int = 0,
    workers: int = 1,
) -> EventTable:
    """Poisson event times and marks per path and component on the grid.

    For component ``i`` the count on ``(t_start, t_end]`` is Poisson with mean
    ``sum_k lambda^i_k * horizon``, times are uniform given the count, and
    marks are drawn with probabilities ``lambda^i_k / sum_k lambda^i_k``.
    """
    tag = stream_tag(JUMPS, stream)
    per_path = _run_chunked(lambda p: _events_one_path(measure, grid, seed, p, tag),
                            n_paths, workers)
    sizes = [len(t) for t, _, _ in per_path]
    total = int(sum(sizes))
    path = np.repeat(np.arange(n_paths), sizes)
    if total:
        time = np.concatenate([t for t, _, _ in per_path])
        comp = np.concatenate([c for _, c, _ in per_path]).astype(int)
        mark = np.concatenate([k for _, _, k in per_path]).astype(int)
    else:
        time, comp, mark = np.zeros(0), np.zeros(0, int), np.zeros(0, int)
    step = np.clip(np.searchsorted(grid.nodes, time, side="left") - 1, 0, grid.n_steps - 1)
    return EventTable(path, time, comp, mark, step, np.full((total, m), np.nan), n_paths)


def brownian_increments(
    grid: TimeGrid, d: int, n_paths: int, seed: int, *, stream: int = 0, workers: int = 1
) -> np.ndarray:
    tag = stream_tag(BROWNIAN, stream)
    sqdt = np.sqrt(grid.dt)[:, None]
    rows = _run_chunked(
        lambda p: path_generator(seed, p, tag).standard_normal((grid.n_steps, d)) * sqdt,
        n_paths, workers,
    )
    if not rows:
        return np.zeros((0, grid.n_steps, d))
    return np.stack(rows)


def simulate_paths(
    model: ForwardModel,
    measure: JumpMeasureSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    stream: int = 0,
    workers: int = 1,
) -> PathBundle:
    """Euler scheme with compensated jumps started at ``model.x0`` on ``grid``.

    Over a step ``[t_i, t_{i+1}]`` every coefficient is evaluated at the node
    time; each jump in the step is applied at its sampled time using the
    state just before it, and the compensator ``dt * sum_k c(t_i, X_i, e_k)
    lambda_k`` is subtracted at the node value.
    """
    if n_paths < 1:
        raise ModelError("n_paths must be positive")
    if measure.l != _jump_dim(model, measure):
        raise ModelError("jump measure dimension does not match c")
    m, d = model.dim_x, model.dim_w
    dW = brownian_increments(grid, d, n_paths, seed, stream=stream, workers=workers)
    events = sample_jump_events(measure, grid, n_paths, seed, m=m, stream=stream, workers=workers)

    # process order: by step, then path, then time; rank = position within (step, path)
    order = np.lexsort((events.time, events.path, events.step))
    ev_step = events.step[order]
    ev_path = events.path[order]
    new_group = np.ones(len(order), dtype=bool)
    new_group[1:] = (ev_step[1:] != ev_step[:-1]) | (ev_path[1:] != ev_path[:-1])
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(len(order)), 0))
    rank = np.arange(len(order)) - group_start
    step_lo = np.searchsorted(ev_step, np.arange(grid.n_steps), "left")
    step_hi = np.searchsorted(ev_step, np.arange(grid.n_steps), "right")

    X = np.empty((n_paths, grid.n_steps + 1, m))
    X[:, 0] = model.x0
    pre_state = events.pre_state
    lam = measure.intensities
    for i in range(grid.n_steps):
        t = float(grid.nodes[i])
        dt = float(grid.nodes[i + 1] - grid.nodes[i])
        x = X[:, i]
        incr = np.asarray(model.a(t, x), float) * dt
        incr += np.einsum("nmq,nq->nm", np.asarray(model.b(t, x), float), dW[:, i])
        for k, e in enumerate(measure.marks):
            if lam[:, k].any():
                ck = np.asarray(model.c(t, x, np.full(n_paths, e)), float)
                incr -= dt * np.einsum("nml,l->nm", ck, lam[:, k])
        xj = x.copy()
        lo, hi = step_lo[i], step_hi[i]
        if hi > lo:
            idx = order[lo:hi]
            r = rank[lo:hi]
            for rr in range(int(r.max()) + 1):
                sel = idx[r == rr]
                paths = events.path[sel]
                pre = xj[paths]
                pre_state[sel] = pre
                cj = np.asarray(
                    model.c(t, pre, measure.marks[events.mark_index[sel]]), float
                )
                xj[paths] += cj[np.arange(len(sel)), :, events.component[sel]]
        X[:, i + 1] = xj + incr
        bad = ~np.isfinite(X[:, i + 1]).all(axis=1) | (np.abs(X[:, i + 1]).max(axis=1) > EXPLOSION_BOUND)
        if bad.any():
            raise SimulationError(f"explosion at (path {int(np.argmax(bad))}, step {i})")
    return PathBundle(grid, n_paths, dW, events, X, seed, stream)


def _jump_dim(model: ForwardModel, measure: JumpMeasureSpec) -> int:
    if measure.n_marks == 0:
        return measure.l
    out = np.asarray(model.c(0.0 + float(model.t0), model.x0[None, :], measure.marks[:1]))
    return out.shape[-1]


def compensated_gamma_increments(bundle: PathBundle, gamma, measure: JumpMeasureSpec) -> np.ndarray:
    """``M_i = sum_{events in step i} gamma^j(t_i, e) - dt_i sum_{j,k} gamma^j(t_i, e_k) lambda^j_k``.

    ``gamma(t, marks) -> (K, l)``. Returns shape ``(n_paths, N)``.
    """
    grid = bundle.grid
    M = np.zeros((bundle.n_paths, grid.n_steps))
    if measure.n_marks == 0:
        return M
    ev = bundle.events
    for i in range(grid.n_steps):
        t = float(grid.nodes[i])
        g = np.broadcast_to(np.asarray(gamma(t, measure.marks), float).reshape(measure.n_marks, -1),
                            (measure.n_marks, measure.l))
        M[:, i] -= float(grid.nodes[i + 1] - grid.nodes[i]) * float(np.sum(g.T * measure.intensities))
        sel = np.flatnonzero(ev.step == i)
        if sel.size:
            np.add.at(M[:, i], ev.path[sel], g[ev.mark_index[sel], ev.component[sel]])
    return M


def hitting_time(bundle: PathBundle, rule: StoppingRule) -> np.ndarray:
    """Per-path node index of ``inf{s > t : |X_s - x| > eta}`` monitored on
    grid nodes and capped at the last node not after ``t + min(eta, delta)``."""
    grid = bundle.grid
    a = grid.index_of(rule.anchor_t)
    cap = grid.floor_index(rule.cap_time)
    if cap <= a:
        raise ModelError(
            f"stopping cap {rule.cap_time} does not reach the node after the anchor; refine the grid"
        )
    x = np.asarray(rule.anchor_x, float)
    dist = np.linalg.norm(bundle.states[:, a + 1 : cap + 1] - x, axis=-1)
    hit = dist > rule.eta
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), a + 1 + first, cap).astype(int)
