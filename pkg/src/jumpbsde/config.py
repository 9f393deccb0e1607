"""Experiment configuration files (TOML).

Schema (every key not listed is a hard error)::

    [model]      m, d, l, x0, lipschitz_x,
                 preset = "constant" (drift, sigma, jump)
                        | "polynomial" (a: (m, K), b: (m, d, K), c: (m, l, K))
    [jumps]      marks: (K,), intensities: (l, K)          # omit: no jumps
    [generator]  preset = "zero" | "constant" (k) | "linear_ode" (rho)
                        | "terms" (terms = {name = coefficient, ...}),
                 gamma: (l,) constant | gamma_table: (l, K),
                 u1, u2: number or {scale, rate}            # default: exact slopes
    [generator2] same as [generator]; second driver for compare / converse
    [terminal]   preset = "identity" | "zero" | "constant" (value) | "affine"
                 (intercept, weights) | "square" (coef) | "abs" (scale, strike),
                 growth_constant
    [terminal2]  same as [terminal]; second terminal for compare
    [grid]       t_start, T_max, n_steps
    [mc]         n_paths, seed, degree, ridge
    [audit]      n_samples, seed, box, tol, x_ref, tail_tol, domain_radius
    [strict]     margin                                     # compare runs the strict test
    [converse]   anchor_t, anchor_x, eta, delta, local_paths,
                 max_extrapolated_fraction
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .audit import AuditSettings
from .comparison import MCParams
from .errors import ConfigError
from .families import (
    AbsTerminal, AffineTerminal, ConstantGamma, Modulus, PolyDiffusion, PolyDrift, PolyJump,
    QuadraticTerminal, TabulatedGamma, TermGenerator, constant_model,
)
from .model import ForwardModel, GeneratorSpec, JumpMeasureSpec, TerminalSpec, TimeGrid
from .regression import RegressionBasis

_GEN_KEYS = {"preset", "k", "rho", "terms", "gamma", "gamma_table", "u1", "u2", "name"}
_TERM_KEYS = {"preset", "value", "intercept", "weights", "coef", "scale", "strike",
              "growth_constant"}
SCHEMA: dict[str, set[str]] = {
    "model": {"m", "d", "l", "x0", "lipschitz_x", "preset", "drift", "sigma", "jump",
              "a", "b", "c"},
    "jumps": {"marks", "intensities"},
    "generator": _GEN_KEYS,
    "generator2": _GEN_KEYS,
    "terminal": _TERM_KEYS,
    "terminal2": _TERM_KEYS,
    "grid": {"t_start", "T_max", "n_steps"},
    "mc": {"n_paths", "seed", "degree", "ridge"},
    "audit": {"n_samples", "seed", "box", "tol", "x_ref", "tail_tol", "domain_radius"},
    "strict": {"margin"},
    "converse": {"anchor_t", "anchor_x", "eta", "delta", "local_paths",
                 "max_extrapolated_fraction"},
}
REQUIRED = ("model", "generator", "terminal", "grid", "mc")


@dataclass
class Experiment:
    raw: dict
    model: ForwardModel
    measure: JumpMeasureSpec
    generator: GeneratorSpec
    generator2: GeneratorSpec | None
    terminal: TerminalSpec
    terminal2: TerminalSpec | None
    grid: TimeGrid
    mc: MCParams
    audit: AuditSettings
    domain_radius: float
    strict: dict | None
    converse: dict | None

    @property
    def seed(self) -> int:
        return self.mc.seed


def check_schema(raw: dict) -> None:
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"section '{section}' must be a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")
    for section in REQUIRED:
        if section not in raw:
            raise ConfigError(f"missing section '{section}'")


def _get(body: dict, key: str, default: Any = None, section: str = "") -> Any:
    if key not in body:
        if default is None:
            raise ConfigError(f"missing key '{section}.{key}'")
        return default
    return body[key]


def build_model(body: dict) -> ForwardModel:
    m, d, l = int(body.get("m", 1)), int(body.get("d", 1)), int(body.get("l", 1))
    x0 = np.broadcast_to(np.asarray(body.get("x0", 0.0), float), (m,))
    preset = body.get("preset", "constant")
    if preset == "constant":
        model = constant_model(m, d, l, drift=body.get("drift", 0.0), sigma=body.get("sigma", 0.0),
                               jump=body.get("jump", 0.0), x0=x0)
    elif preset == "polynomial":
        a = np.asarray(_get(body, "a", section="model"), float)
        b = np.asarray(_get(body, "b", section="model"), float)
        c = np.asarray(body.get("c", np.zeros((m, l, 1))), float)
        if a.ndim != 2 or a.shape[0] != m:
            raise ConfigError(f"model.a must have shape (m, K), got {a.shape}")
        if b.ndim != 3 or b.shape[:2] != (m, d):
            raise ConfigError(f"model.b must have shape (m, d, K), got {b.shape}")
        if c.ndim != 3 or c.shape[:2] != (m, l):
            raise ConfigError(f"model.c must have shape (m, l, K), got {c.shape}")
        model = ForwardModel(m, d, PolyDrift(a), PolyDiffusion(b), PolyJump(c), x0)
    else:
        raise ConfigError(f"unknown model preset '{preset}'")
    if "lipschitz_x" in body:
        model = ForwardModel(model.dim_x, model.dim_w, model.a, model.b, model.c, model.x0,
                             model.t0, float(body["lipschitz_x"]))
    return model


def build_measure(body: dict | None, l: int) -> JumpMeasureSpec:
    if not body:
        return JumpMeasureSpec.none(l)
    marks = np.atleast_1d(np.asarray(_get(body, "marks", section="jumps"), float))
    lam = np.asarray(_get(body, "intensities", section="jumps"), float)
    if lam.ndim == 1:
        lam = lam[None, :]
    if lam.shape != (l, marks.shape[0]):
        raise ConfigError(f"jumps.intensities must have shape ({l}, {marks.shape[0]})")
    return JumpMeasureSpec(marks, lam)


def _modulus(v) -> Modulus:
    if isinstance(v, dict):
        unknown = set(v) - {"scale", "rate"}
        if unknown:
            raise ConfigError(f"unknown modulus key(s) {sorted(unknown)}")
        return Modulus(float(v.get("scale", 0.0)), float(v.get("rate", 0.0)))
    return Modulus(float(v))


def build_generator(body: dict, measure: JumpMeasureSpec, section: str = "generator") -> GeneratorSpec:
    preset = body.get("preset", "terms")
    if preset == "zero":
        terms = {}
    elif preset == "constant":
        terms = {"const": float(_get(body, "k", section=section))}
    elif preset == "linear_ode":
        terms = {"y": -float(_get(body, "rho", section=section))}
    elif preset == "terms":
        terms = dict(body.get("terms", {}))
    else:
        raise ConfigError(f"unknown {section} preset '{preset}'")
    try:
        f1 = TermGenerator(terms)
    except ConfigError as exc:
        raise ConfigError(f"{section}: {exc}") from None
    l = measure.l
    if "gamma_table" in body:
        table = np.asarray(body["gamma_table"], float)
        if table.shape != (l, measure.n_marks):
            raise ConfigError(f"{section}.gamma_table must have shape ({l}, {measure.n_marks})")
        gamma = TabulatedGamma(tuple(measure.marks.tolist()), table)
    else:
        values = np.broadcast_to(np.asarray(body.get("gamma", 0.0), float), (l,))
        gamma = ConstantGamma(tuple(values.tolist()))
    norm = 0.0
    if measure.n_marks:
        g = np.asarray(gamma(0.0, measure.marks), float)
        norm = float(np.sqrt(np.sum(g.T**2 * measure.intensities)))
    ly, lzu = f1.slopes(norm)
    u1 = _modulus(body["u1"]) if "u1" in body else Modulus(ly)
    u2 = _modulus(body["u2"]) if "u2" in body else Modulus(max(lzu, norm))
    return GeneratorSpec(f1, gamma, u1, u2, body.get("name", preset if preset != "terms" else str(terms)))


def build_terminal(body: dict, m: int, section: str = "terminal") -> TerminalSpec:
    preset = body.get("preset", "identity")
    if preset == "identity":
        h = AffineTerminal(0.0, (1.0,) + (0.0,) * (m - 1))
        default_c = 1.0
    elif preset == "zero":
        h, default_c = AffineTerminal(0.0, (0.0,)), 0.0
    elif preset == "constant":
        v = float(_get(body, "value", section=section))
        h, default_c = AffineTerminal(v, (0.0,)), abs(v)
    elif preset == "affine":
        w = tuple(np.broadcast_to(np.asarray(body.get("weights", 1.0), float), (m,)).tolist())
        c0 = float(body.get("intercept", 0.0))
        h, default_c = AffineTerminal(c0, w), max(abs(c0), float(np.linalg.norm(w)))
    elif preset == "square":
        h, default_c = QuadraticTerminal(float(body.get("coef", 1.0))), None
    elif preset == "abs":
        s, k = float(body.get("scale", 1.0)), float(body.get("strike", 0.0))
        h, default_c = AbsTerminal(s, k), abs(s) * max(1.0, abs(k))
    else:
        raise ConfigError(f"unknown {section} preset '{preset}'")
    if "growth_constant" in body:
        C = float(body["growth_constant"])
    elif default_c is None:
        raise ConfigError(f"{section}.growth_constant is required for preset '{preset}'")
    else:
        C = default_c
    return TerminalSpec(h, C, preset)


def load_config(path: str | Path, *, seed: int | None = None, n_paths: int | None = None) -> Experiment:
    try:
        raw = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_experiment(raw, seed=seed, n_paths=n_paths)


def build_experiment(raw: dict, *, seed: int | None = None, n_paths: int | None = None) -> Experiment:
    """Validate ``raw`` against :data:`SCHEMA` and build every object.

    ``seed`` / ``n_paths`` override ``[mc]`` and are reflected in ``raw``
    (the config echo written to reports).
    """
    raw = copy.deepcopy(raw)
    check_schema(raw)
    if seed is not None:
        raw["mc"]["seed"] = int(seed)
    if n_paths is not None:
        raw["mc"]["n_paths"] = int(n_paths)
    try:
        model = build_model(raw["model"])
        measure = build_measure(raw.get("jumps"), int(raw["model"].get("l", 1)))
        gen = build_generator(raw["generator"], measure)
        gen2 = build_generator(raw["generator2"], measure, "generator2") if "generator2" in raw else None
        term = build_terminal(raw["terminal"], model.dim_x)
        term2 = build_terminal(raw["terminal2"], model.dim_x, "terminal2") if "terminal2" in raw else None
        g = raw["grid"]
        grid = TimeGrid(float(g.get("t_start", 0.0)), float(_get(g, "T_max", section="grid")),
                        int(_get(g, "n_steps", section="grid")))
        mcb = raw["mc"]
        mc = MCParams(
            n_paths=int(_get(mcb, "n_paths", section="mc")),
            seed=int(mcb.get("seed", 0)),
            basis=RegressionBasis(int(mcb.get("degree", 2)), float(mcb.get("ridge", 1e-8))),
            local_paths=int(raw["converse"]["local_paths"]) if "local_paths" in raw.get("converse", {}) else None,
        )
        ab = raw.get("audit", {})
        audit = AuditSettings(
            n_samples=int(ab.get("n_samples", 2048)), seed=int(ab.get("seed", 0)),
            box=float(ab.get("box", 5.0)), tol=float(ab.get("tol", 0.05)),
            dims=(model.dim_x, model.dim_w),
            x_ref=tuple(np.atleast_1d(ab["x_ref"]).tolist()) if "x_ref" in ab else None,
            tail_tol=float(ab.get("tail_tol", 1e-2)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    if mc.n_paths < 1:
        raise ConfigError("mc.n_paths must be positive")
    if not 0 <= mc.seed < 2**64:
        raise ConfigError("mc.seed must be an unsigned 64-bit integer")
    return Experiment(raw, model, measure, gen, gen2, term, term2, grid, mc, audit,
                      float(ab.get("domain_radius", 3.0)), raw.get("strict"), raw.get("converse"))
