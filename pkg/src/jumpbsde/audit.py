"""Sampled and exact checks of the generator assumptions.

A1 (square-integrable ``f(t, 0, 0, 0)``), A2 (Lipschitz in y and in (z, U)
with the declared moduli), A3 (continuity in t) and A4 in the reduced form
used by the forward-backward system: deterministic ``gamma >= -1`` with
``sum |gamma|^2 lambda <= u2^2``.

Lipschitz and continuity audits are statistical: they can refute an
assumption, never prove it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import GeneratorSpec, JumpMeasureSpec, TimeGrid, eval_gamma, gamma_l2_norm_sq

PASS, FAIL, WARN = "pass", "fail", "warn"

_trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2 lacks trapezoid


@dataclass
class AssumptionCheck:
    name: str
    status: str
    witness: Any = None
    extremes: dict = field(default_factory=dict)
    advisory: bool = False
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "witness": self.witness,
            "extremes": self.extremes,
            "advisory": self.advisory,
            "detail": self.detail,
        }


@dataclass
class AuditReport:
    generator: str
    checks: list[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_names(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "passed": self.passed,
            "failed": self.failed_names(),
            "checks": {c.name: c.to_dict() for c in self.checks},
        }


@dataclass(frozen=True)
class AuditSettings:
    n_samples: int = 2048
    seed: int = 0
    box: float = 5.0
    tol: float = 0.05
    dims: tuple = (1, 1)  # (m, d)
    x_ref: tuple | None = None
    a1_cap: float = 1e12
    a1_rtol: float = 1e-3
    a3_mesh: int = 2001
    tail_tol: float = 1e-2


def _f(gen, t, x, y, z, g) -> np.ndarray:
    return np.broadcast_to(np.asarray(gen.f1(float(t), x, y, z, g), float), y.shape)


def _x_ref(settings: AuditSettings) -> np.ndarray:
    m = settings.dims[0]
    return np.zeros(m) if settings.x_ref is None else np.broadcast_to(
        np.asarray(settings.x_ref, float), (m,)
    )


def audit_A1(gen: GeneratorSpec, grid: TimeGrid, n_samples: int = 0, seed: int = 0,
             settings: AuditSettings = AuditSettings()) -> AssumptionCheck:
    """Midpoint quadrature of ``|f1(t, x_ref, 0, 0, 0)|^2`` on a doubling ladder.

    The ladder stops at the first level that settles. Passes when it settles (relative change <= ``a1_rtol``) below
    ``a1_cap``; a non-finite value or a ladder that keeps growing fails.
    """
    m, d = settings.dims
    x = _x_ref(settings)[None, :]
    zero, zz = np.zeros(1), np.zeros((1, d))
    a, b = grid.t_start, grid.t_end
    values = []
    for level in range(9):
        n = 64 * 2**level
        ts = a + (b - a) * (np.arange(n) + 0.5) / n
        with np.errstate(all="ignore"):
            f = np.array([_f(gen, t, x, zero, zz, zero)[0] for t in ts])
        if not np.isfinite(f).all():
            return AssumptionCheck("A1", FAIL, {"t": float(ts[np.argmin(np.isfinite(f))])},
                                   detail="non-finite f1(t, x_ref, 0, 0, 0)")
        values.append(float(np.sum(f * f) * (b - a) / n))
        if values[-1] > settings.a1_cap:
            break
        if len(values) > 1 and abs(values[-1] - values[-2]) <= settings.a1_rtol * abs(values[-1]):
            break
    last, prev = values[-1], values[-2]
    change = abs(last - prev) / max(abs(last), 1e-300) if last > 0 else 0.0
    ok = last <= settings.a1_cap and change <= settings.a1_rtol
    return AssumptionCheck(
        "A1", PASS if ok else FAIL,
        None if ok else {"integral_ladder": values},
        {"integral": last, "relative_change": change},
        detail="quadrature of |f1(t, x_ref, 0, 0, 0)|^2 over the horizon",
    )


def _sample_points(rng, n, settings):
    m, d = settings.dims
    box = settings.box
    x = _x_ref(settings) + rng.uniform(-box, box, size=(n, m))
    y = rng.uniform(-box, box, size=n)
    z = rng.uniform(-box, box, size=(n, d))
    g = rng.uniform(-box, box, size=n)
    return x, y, z, g


def _perturb(rng, v: np.ndarray, box: float) -> np.ndarray:
    """Half the rows move to an independent point, half by a tiny step so
    local slopes (e.g. of sin at 0) are approached."""
    n = v.shape[0]
    wide = rng.uniform(-box, box, size=v.shape)
    scale = 10.0 ** rng.uniform(-6, 0, size=(n,) + (1,) * (v.ndim - 1))
    local = v + scale * rng.standard_normal(v.shape)
    pick = (np.arange(n) % 2 == 0).reshape((n,) + (1,) * (v.ndim - 1))
    return np.where(pick, wide, local)


def audit_A2(gen: GeneratorSpec, n_samples: int = 2048, seed: int = 0, *,
             grid: TimeGrid, measure: JumpMeasureSpec | None = None,
             settings: AuditSettings = AuditSettings()) -> AssumptionCheck:
    """Largest sampled slope quotients against the declared moduli.

    The slope in the jump kernel ``U`` is the slope in ``Gamma`` times
    ``sqrt(sum |gamma|^2 lambda)`` (Cauchy-Schwarz).
    """
    measure = measure if measure is not None else JumpMeasureSpec.none()
    rng = np.random.default_rng(seed)
    times = np.linspace(grid.t_start, grid.t_end, 16)
    per_t = max(8, n_samples // len(times))
    worst = {"y": (0.0, None), "z": (0.0, None), "U": (0.0, None)}
    witness = None
    for t in times:
        u1, u2 = float(gen.u1(t)), float(gen.u2(t))
        norm = np.sqrt(gamma_l2_norm_sq(gen, measure, t))
        x, y, z, g = _sample_points(rng, per_t, settings)
        base = _f(gen, t, x, y, z, g)
        y2, z2, g2 = _perturb(rng, y, settings.box), _perturb(rng, z, settings.box), \
            _perturb(rng, g, settings.box)
        with np.errstate(all="ignore"):
            sy = np.abs(base - _f(gen, t, x, y2, z, g)) / np.abs(y - y2)
            sz = np.abs(base - _f(gen, t, x, y, z2, g)) / np.linalg.norm(z - z2, axis=1)
            sg = np.abs(base - _f(gen, t, x, y, z, g2)) / np.abs(g - g2) * norm
        for key, s, bound in (("y", sy, u1), ("z", sz, u2), ("U", sg, u2)):
            s = np.nan_to_num(s, nan=0.0, posinf=np.inf)
            j = int(np.argmax(s))
            if s[j] > worst[key][0]:
                worst[key] = (float(s[j]), float(t))
            if witness is None and s[j] > bound * (1 + settings.tol) + 1e-12:
                witness = {"argument": key, "t": float(t), "slope": float(s[j]),
                           "declared": float(bound)}
    ts = np.linspace(grid.t_start, grid.t_end, 257)
    moduli = np.array([float(gen.u1(t)) + float(gen.u2(t)) ** 2 for t in ts])
    integral = float(_trapezoid(moduli, ts))
    extremes = {f"max_slope_{k}": v[0] for k, v in worst.items()}
    extremes["truncated_moduli_integral"] = integral
    ok = witness is None and np.isfinite(integral) and moduli.min() >= 0
    return AssumptionCheck(
        "A2", PASS if ok else FAIL, witness, extremes,
        detail=f"sampled slopes vs declared u1, u2 (tolerance {settings.tol:.0%})",
    )


def _bisect_jump(fn, a: float, b: float, fa: np.ndarray, fb: np.ndarray, k: int,
                 iters: int = 48) -> tuple[float, float]:
    jump = abs(fb[k] - fa[k])
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = fn(mid)
        if abs(fm[k] - fa[k]) >= abs(fb[k] - fm[k]):
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b), abs(fb[k] - fa[k]) / jump if jump > 0 else 0.0


def audit_A3(gen: GeneratorSpec, n_samples: int = 8, seed: int = 0, *,
             grid: TimeGrid, settings: AuditSettings = AuditSettings()) -> AssumptionCheck:
    """Scan ``t -> f1(t, .)`` on a mesh at sampled arguments; the largest
    mesh jumps are bisected and flagged when they do not shrink.

    Advisory evidence of a discontinuity, not a proof of continuity.
    """
    rng = np.random.default_rng(seed)
    x, y, z, g = _sample_points(rng, n_samples, settings)

    def fn(t):
        with np.errstate(all="ignore"):
            return _f(gen, t, x, y, z, g)

    ts = np.linspace(grid.t_start, grid.t_end, settings.a3_mesh)
    F = np.array([fn(t) for t in ts])  # (mesh, n_samples)
    if not np.isfinite(F).all():
        j = int(np.argmin(np.isfinite(F).all(axis=1)))
        return AssumptionCheck("A3", FAIL, {"t": float(ts[j])}, advisory=True,
                               detail="non-finite f1 on the time mesh")
    dF = np.abs(np.diff(F, axis=0))
    scale = max(1.0, float(np.abs(F).max()))
    for k in range(n_samples):
        col = dF[:, k]
        floor = max(10 * float(np.median(col)), 1e-12 * scale)
        for j in np.argsort(col)[::-1][:10]:
            if col[j] <= floor:
                break
            loc, ratio = _bisect_jump(fn, ts[j], ts[j + 1], F[j], F[j + 1], k)
            if ratio > 0.25:
                return AssumptionCheck(
                    "A3", FAIL, {"t": loc, "jump": float(col[j])},
                    {"max_mesh_jump": float(dF.max())}, advisory=True,
                    detail="jump in t persists under bisection",
                )
    return AssumptionCheck("A3", PASS, None, {"max_mesh_jump": float(dF.max())},
                           advisory=True, detail="no persistent jump in t found")


def audit_A4_gamma(gen: GeneratorSpec, measure: JumpMeasureSpec, grid: TimeGrid) -> AssumptionCheck:
    """Exact check over the finite mark set and the grid nodes."""
    min_gamma, max_ratio, witness = np.inf, 0.0, None
    for t in grid.nodes:
        t = float(t)
        g = eval_gamma(gen, t, measure.marks, measure.l)
        norm_sq = float(np.sum(g.T**2 * measure.intensities))
        u2_sq = float(gen.u2(t)) ** 2
        if g.size:
            k, i = np.unravel_index(np.argmin(g), g.shape)
            if g[k, i] < min_gamma:
                min_gamma = float(g[k, i])
            if witness is None and g[k, i] < -1:
                witness = {"t": t, "mark": float(measure.marks[k]), "component": int(i),
                           "gamma": float(g[k, i]), "violates": "gamma >= -1"}
        if norm_sq > 0:
            max_ratio = max(max_ratio, norm_sq / u2_sq if u2_sq > 0 else np.inf)
        if witness is None and norm_sq > u2_sq * (1 + 1e-12):
            witness = {"t": t, "gamma_norm_sq": norm_sq, "u2_sq": u2_sq,
                       "violates": "sum |gamma|^2 lambda <= u2^2"}
    return AssumptionCheck(
        "A4", PASS if witness is None else FAIL, witness,
        {"min_gamma": None if min_gamma == np.inf else min_gamma,
         "max_norm_ratio": max_ratio},
        detail="exact over marks and grid nodes",
    )


def audit_tail(gen: GeneratorSpec, grid: TimeGrid, tol: float = 1e-2) -> AssumptionCheck:
    """Warn when ``int_{T}^{2T} u1 + u2^2`` is not small: the truncation of
    the infinite horizon at ``T`` is then questionable."""
    T = grid.t_end
    ts = np.linspace(T, 2 * T, 257)
    tail = float(_trapezoid([float(gen.u1(t)) + float(gen.u2(t)) ** 2 for t in ts], ts))
    return AssumptionCheck(
        "tail", WARN if tail > tol else PASS, None, {"tail_integral": tail},
        advisory=True, detail=f"integral of u1 + u2^2 over [T, 2T] vs tolerance {tol}",
    )


def run_audit(gen: GeneratorSpec, measure: JumpMeasureSpec, grid: TimeGrid,
              settings: AuditSettings = AuditSettings()) -> AuditReport:
    checks = [
        audit_A1(gen, grid, settings.n_samples, settings.seed, settings),
        audit_A2(gen, settings.n_samples, settings.seed, grid=grid, measure=measure,
                 settings=settings),
        audit_A3(gen, 8, settings.seed, grid=grid, settings=settings),
        audit_A4_gamma(gen, measure, grid),
        audit_tail(gen, grid, settings.tail_tol),
    ]
    return AuditReport(gen.name, checks)
