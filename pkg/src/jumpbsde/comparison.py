"""Comparison, strict comparison and converse-comparison experiments.

"Almost surely" orderings are rendered as confidence gates: with ``se`` the
sum of the two standard errors, ``Y1 <= Y2 + 3 se`` counts as ordered.
Both equations are always solved on one :class:`PathBundle` (common random
numbers), so equal generators and terminals give bit-identical estimates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .audit import AuditSettings, run_audit
from .backward import BackwardSolution, feynman_kac_u, feynman_kac_z, solve_backward
from .errors import AssumptionError
from .model import (
    ForwardModel, GeneratorSpec, JumpMeasureSpec, StoppingRule, TerminalSpec, TimeGrid,
)
from .paths import hitting_time, simulate_paths
from .regression import RegressionBasis

ORDERED = "ordered"
STRICTLY_ORDERED = "strictly_ordered"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

N_SE = 3.0
STRICT_TOL = 0.25
GLOBAL_STREAM = 0
LOCAL_STREAM = 1


@dataclass(frozen=True)
class MCParams:
    n_paths: int = 10_000
    seed: int = 0
    basis: RegressionBasis = field(default_factory=RegressionBasis)
    workers: int = 1
    local_paths: int | None = None  # converse restart; defaults to n_paths


@dataclass
class ComparisonReport:
    experiment: str
    Y1: float
    SE1: float
    Y2: float
    SE2: float
    verdict: str
    generator_gap: float | None
    tau_stats: dict
    seed: int
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def combined_se(self) -> float:
        return self.SE1 + self.SE2

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "Y1": self.Y1,
            "SE1": self.SE1,
            "Y2": self.Y2,
            "SE2": self.SE2,
            "verdict": self.verdict,
            "generator_gap": self.generator_gap,
            "tau_stats": self.tau_stats,
            "details": self.details,
            "config": self.config,
        }

    def csv_row(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "Y1": self.Y1,
            "SE1": self.SE1,
            "Y2": self.Y2,
            "SE2": self.SE2,
            "gap": self.generator_gap,
            "tau_mean": self.tau_stats.get("mean"),
            "verdict": self.verdict,
        }


def _require_audited(gens: Sequence[GeneratorSpec], measure, grid, settings) -> dict:
    reports = {}
    for k, gen in enumerate(gens, start=1):
        rep = run_audit(gen, measure, grid, settings)
        if not rep.passed:
            raise AssumptionError(
                f"generator f{k} ({gen.name}) refused: failed {', '.join(rep.failed_names())}"
            )
        reports[f"f{k}"] = rep.to_dict()
    return reports


def _solve_pair(bundle, gens, measure, terminals, mc: MCParams, **kw) -> list[BackwardSolution]:
    jobs = [
        lambda g=g, xi=xi: solve_backward(bundle, g, measure, xi, mc.basis, **kw)
        for g, xi in zip(gens, terminals)
    ]
    if mc.workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            return list(pool.map(lambda job: job(), jobs))
    return [job() for job in jobs]


def _tau_stats(tau_times: np.ndarray) -> dict:
    return {"mean": float(np.mean(tau_times)), "min": float(np.min(tau_times)),
            "max": float(np.max(tau_times))}


def _generator_values(gen, sol: BackwardSolution, bundle, i: int, act: np.ndarray) -> np.ndarray:
    t = float(bundle.grid.nodes[i])
    # drivers are evaluated at the *first* solution's (Y, Z, Gamma), as in the
    # comparison hypothesis f1(t, Y^1, Z^1, U^1) <= f2(t, Y^1, Z^1, U^1)
    return np.asarray(
        gen.f1(t, bundle.states[act, i], sol.Y[act, i], sol.Z[act, i], sol.Gamma[act, i]), float
    )


def _driver_gap_on_cloud(gen1, gen2, sol, bundle) -> np.ndarray:
    """``f1 - f2`` at every active (node, path) of ``sol``."""
    gaps = []
    for i in range(bundle.grid.n_steps):
        act = np.flatnonzero(sol.stop > i)
        if act.size:
            gaps.append(_generator_values(gen1, sol, bundle, i, act)
                        - _generator_values(gen2, sol, bundle, i, act))
    return np.concatenate(gaps) if gaps else np.zeros(0)


def anchor_quantities(solution: BackwardSolution, model: ForwardModel, gen: GeneratorSpec,
                      measure: JumpMeasureSpec, t: float, x) -> dict:
    """``u(t, x)``, ``chi(t, x)`` and ``zeta(t, x)`` from a fitted solution."""
    x = np.atleast_1d(np.asarray(x, float))
    u_fn = solution.as_function()
    est = solution.value_function(t, x[None, :])
    return {
        "u": float(est.value[0]),
        "chi": feynman_kac_z(u_fn, model, t, x),
        "zeta": feynman_kac_u(u_fn, model, gen, measure, t, x),
        "extrapolated": est.any_extrapolated,
    }


def scan_generator_gap(gen1: GeneratorSpec, gen2: GeneratorSpec, solution: BackwardSolution,
                       model: ForwardModel, measure: JumpMeasureSpec, anchors) -> list[dict]:
    """``f1 - f2`` at ``(t, x, u(t,x), chi(t,x), zeta(t,x))`` for each anchor."""
    rows = []
    for t, x in anchors:
        x = np.atleast_1d(np.asarray(x, float))
        q = anchor_quantities(solution, model, gen1, measure, t, x)
        args = (float(t), x[None, :], np.array([q["u"]]), q["chi"][None, :], np.array([q["zeta"]]))
        f1 = float(np.asarray(gen1.f1(*args)).reshape(-1)[0])
        f2 = float(np.asarray(gen2.f1(*args)).reshape(-1)[0])
        rows.append({
            "t": float(t), "x": x.tolist(), "u": q["u"], "chi": q["chi"].tolist(),
            "zeta": q["zeta"], "f1": f1, "f2": f2, "gap": f1 - f2,
            "extrapolated": q["extrapolated"],
        })
    return rows


def run_comparison(
    gen1: GeneratorSpec, gen2: GeneratorSpec, term1: TerminalSpec, term2: TerminalSpec,
    model: ForwardModel, measure: JumpMeasureSpec, grid: TimeGrid, mc: MCParams = MCParams(),
    *, audit_settings: AuditSettings | None = None, config: dict | None = None,
) -> ComparisonReport:
    """Solve both BSDEs on common paths and gate ``Y1 <= Y2`` at 3 SE."""
    settings = audit_settings or AuditSettings(dims=(model.dim_x, model.dim_w))
    audits = _require_audited([gen1, gen2], measure, grid, settings)
    bundle = simulate_paths(model, measure, grid, mc.n_paths, mc.seed, workers=mc.workers)
    XT = bundle.states[:, -1]
    xi1, xi2 = np.asarray(term1.h(XT), float), np.asarray(term2.h(XT), float)
    sol1, sol2 = _solve_pair(bundle, [gen1, gen2], measure, [xi1, xi2], mc)

    gaps = _driver_gap_on_cloud(gen1, gen2, sol1, bundle)
    hyp_driver = bool(np.all(gaps <= 1e-12))
    hyp_terminal = bool(np.all(xi1 <= xi2))
    se = sol1.se + sol2.se
    surface_excess = sol1.Y[:, :-1] - sol2.Y[:, :-1]
    surface_viol = float(np.mean(surface_excess > N_SE * se))
    if not (hyp_driver and hyp_terminal):
        verdict = INCONCLUSIVE
    else:
        verdict = ORDERED if sol1.y0 <= sol2.y0 + N_SE * se else VIOLATED
    q = scan_generator_gap(gen1, gen2, sol1, model, measure, [(grid.t_start, model.x0)])[0]
    return ComparisonReport(
        "comparison", sol1.y0, sol1.se, sol2.y0, sol2.se, verdict, q["gap"],
        _tau_stats(np.full(1, grid.horizon)), mc.seed, config or {},
        {
            "hypothesis": {"driver_dominated": hyp_driver, "terminal_dominated": hyp_terminal,
                           "max_driver_gap": float(gaps.max()) if gaps.size else 0.0,
                           "vacuous": not (hyp_driver and hyp_terminal)},
            "difference": sol2.y0 - sol1.y0,
            "surface_violation_fraction": surface_viol,
            "anchor": q,
            "audits": audits,
        },
    )


def run_strict_comparison(
    gen1: GeneratorSpec, gen2: GeneratorSpec, term: TerminalSpec, model: ForwardModel,
    measure: JumpMeasureSpec, grid: TimeGrid, mc: MCParams = MCParams(), *,
    margin: float | None = None, audit_settings: AuditSettings | None = None,
    config: dict | None = None,
) -> ComparisonReport:
    """Same terminal, ``f2 < f1`` by at least ``margin`` on the cloud.

    ``strictly_ordered`` iff ``Y1 - Y2 >= margin * horizon * (1 - 25%) - 3 se``.
    With ``margin=None`` the smallest observed driver gap is used; a
    non-positive margin makes the experiment inconclusive.
    """
    settings = audit_settings or AuditSettings(dims=(model.dim_x, model.dim_w))
    audits = _require_audited([gen1, gen2], measure, grid, settings)
    bundle = simulate_paths(model, measure, grid, mc.n_paths, mc.seed, workers=mc.workers)
    xi = np.asarray(term.h(bundle.states[:, -1]), float)
    sol1, sol2 = _solve_pair(bundle, [gen1, gen2], measure, [xi, xi], mc)

    gaps = _driver_gap_on_cloud(gen1, gen2, sol1, bundle)
    observed = float(gaps.min()) if gaps.size else 0.0
    m = observed if margin is None else float(margin)
    precondition = m > 0 and observed >= m * (1 - 1e-12)
    diff = sol1.y0 - sol2.y0
    se = sol1.se + sol2.se
    threshold = m * grid.horizon * (1 - STRICT_TOL) - N_SE * se
    if not precondition:
        verdict = INCONCLUSIVE
    elif diff >= threshold:
        verdict = STRICTLY_ORDERED
    elif diff >= -N_SE * se:
        verdict = INCONCLUSIVE
    else:
        verdict = VIOLATED
    q = scan_generator_gap(gen1, gen2, sol1, model, measure, [(grid.t_start, model.x0)])[0]
    return ComparisonReport(
        "strict_comparison", sol1.y0, sol1.se, sol2.y0, sol2.se, verdict, q["gap"],
        _tau_stats(np.full(1, grid.horizon)), mc.seed, config or {},
        {
            "margin": m, "observed_min_gap": observed, "precondition": precondition,
            "difference": diff, "threshold": threshold, "anchor": q, "audits": audits,
        },
    )


def _local_terminal(sol_g: BackwardSolution, offset: int, bundle, stop) -> tuple[np.ndarray, np.ndarray]:
    """``u(t_tau, X_tau)`` per path from the global fit; returns (values, extrapolated)."""
    xi = np.empty(bundle.n_paths)
    extra = np.zeros(bundle.n_paths, dtype=bool)
    for node in np.unique(stop):
        sel = np.flatnonzero(stop == node)
        u, _, _, inside = sol_g.node_functions(int(node) + offset, bundle.states[sel, node])
        xi[sel] = u
        extra[sel] = ~inside
    return xi, extra


def _converse_verdict(diff: float, se: float, gap: float, extrapolated: bool) -> tuple[str, bool]:
    agree = bool(np.sign(diff) == np.sign(gap))
    if extrapolated:
        return INCONCLUSIVE, agree
    if gap == 0 and diff == 0:
        return ORDERED, True
    significant = abs(diff) > N_SE * se
    if agree:
        return (STRICTLY_ORDERED if significant else ORDERED), True
    return (VIOLATED if significant else INCONCLUSIVE), False


def run_converse_experiment(
    gen1: GeneratorSpec, gen2: GeneratorSpec, model: ForwardModel, measure: JumpMeasureSpec,
    term: TerminalSpec, anchor_t: float, anchor_x, eta: float, delta: float, grid: TimeGrid,
    mc: MCParams = MCParams(), *, max_extrapolated_fraction: float = 0.01,
    audit_settings: AuditSettings | None = None, config: dict | None = None,
) -> ComparisonReport:
    """Localised comparison around ``(t, x)``.

    1. Solve the global equation with ``f1`` and terminal ``h(X_T)`` to fit ``u``.
    2. Restart fresh paths at ``(t, x)``; stop them at the exit time of the
       ``eta``-ball capped at ``t + min(eta, delta)``.
    3. Solve with ``f1`` and with ``f2`` on ``[t, tau]`` from the common
       terminal ``u(tau, X_tau)``.
    4. Compare ``Y1 - Y2`` with the sign of ``f1 - f2`` at
       ``(t, x, u, chi, zeta)``.

    The same comparison is repeated for the deterministic times
    ``t + k delta / 4`` (reported in ``details``).
    """
    settings = audit_settings or AuditSettings(dims=(model.dim_x, model.dim_w))
    audits = _require_audited([gen1, gen2], measure, grid, settings)
    x = np.atleast_1d(np.asarray(anchor_x, float))
    rule = StoppingRule(eta, delta, anchor_t, x)
    a = grid.index_of(anchor_t)

    bundle_g = simulate_paths(model, measure, grid, mc.n_paths, mc.seed,
                              stream=GLOBAL_STREAM, workers=mc.workers)
    xi_g = np.asarray(term.h(bundle_g.states[:, -1]), float)
    sol_g = solve_backward(bundle_g, gen1, measure, xi_g, mc.basis, terminal_fn=term.h)

    cap = grid.floor_index(rule.cap_time)
    if cap <= a:
        raise AssumptionError("t + min(eta, delta) does not reach the next grid node")
    local_grid = grid.subgrid(a, cap)
    local_model = model.started_at(anchor_t, x)
    n_local = mc.local_paths or mc.n_paths
    bundle = simulate_paths(local_model, measure, local_grid, n_local, mc.seed,
                            stream=LOCAL_STREAM, workers=mc.workers)
    tau = hitting_time(bundle, rule)
    xi, extra = _local_terminal(sol_g, a, bundle, tau)
    sol1, sol2 = _solve_pair(bundle, [gen1, gen2], measure, [xi, xi], mc, stop=tau)

    q = scan_generator_gap(gen1, gen2, sol_g, model, measure, [(anchor_t, x)])[0]
    diff = sol1.y0 - sol2.y0
    se = sol1.se + sol2.se
    frac = float(extra.mean())
    verdict, agree = _converse_verdict(diff, se, q["gap"], frac > max_extrapolated_fraction)

    fixed = []
    for k in range(1, 5):
        node = local_grid.floor_index(anchor_t + k * delta / 4)
        if node == 0:
            continue
        stop = np.full(n_local, node)
        xv, ev = _local_terminal(sol_g, a, bundle, stop)
        s1, s2 = _solve_pair(bundle, [gen1, gen2], measure, [xv, xv], mc, stop=stop)
        d, s = s1.y0 - s2.y0, s1.se + s2.se
        fixed.append({"v": float(local_grid.nodes[node]), "Y1": s1.y0, "Y2": s2.y0,
                      "difference": d, "combined_se": s,
                      "sign_agreement": bool(np.sign(d) == np.sign(q["gap"])),
                      "extrapolated_fraction": float(ev.mean())})

    return ComparisonReport(
        "converse", sol1.y0, sol1.se, sol2.y0, sol2.se, verdict, q["gap"],
        _tau_stats(local_grid.nodes[tau] - anchor_t), mc.seed, config or {},
        {
            "anchor": q,
            "difference": diff,
            "sign_agreement": agree,
            "extrapolated_fraction": frac,
            "tau_cap": float(local_grid.nodes[-1]),
            "hit_fraction": float(np.mean(tau < local_grid.n_steps)),
            "global_Y0": sol_g.y0,
            "deterministic_times": fixed,
            "smoothness": smoothness_diagnostic(sol_g, range(a, cap + 1), x),
            "audits": audits,
        },
    )


def smoothness_diagnostic(solution: BackwardSolution, nodes, x, h: float = 1e-2) -> dict:
    """Largest central second difference of ``u(t_i, .)`` at ``x`` over the
    given nodes. Diagnostic only; smoothness of ``u`` is assumed, not checked."""
    x = np.atleast_1d(np.asarray(x, float))
    m = x.shape[0]
    worst = 0.0
    for i in nodes:
        pts = np.concatenate([x[None, :], x + h * np.eye(m), x - h * np.eye(m)])
        u = solution.node_functions(int(i), pts)[0]
        second = (u[1 : m + 1] + u[m + 1 :] - 2 * u[0]) / h**2
        worst = max(worst, float(np.max(np.abs(second))))
    return {"max_abs_second_derivative": worst, "step": h}


def sweep_report_summary(reports: Sequence[ComparisonReport]) -> dict[str, Any]:
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    return {"n": len(reports), "verdicts": counts}
