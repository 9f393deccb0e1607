"""Batch experiments shared by ``scripts/`` and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backward import solve_backward
from .comparison import MCParams, ComparisonReport, run_comparison, run_converse_experiment
from .families import (
    AffineTerminal, constant_generator, constant_model, linear_ode_generator, single_jump,
    term_generator, zero_generator,
)
from .model import GeneratorSpec, TerminalSpec, TimeGrid
from .paths import simulate_paths

CONVERSE_SEEDS = tuple(range(10))
REFINEMENT_SEEDS = tuple(range(5))


@dataclass(frozen=True)
class RandomPair:
    gen1: GeneratorSpec
    gen2: GeneratorSpec
    terminal: TerminalSpec
    terms1: dict
    terms2: dict


def random_pair(rng: np.random.Generator, measure) -> RandomPair:
    """Lipschitz driver ``f1`` and ``f2 = f1 + |p + q x|``; shared affine terminal."""
    terms1 = {
        "const": rng.uniform(-1, 1),
        "y": rng.uniform(-1, 1),
        "x": rng.uniform(-0.3, 0.3),
        "sin_z": rng.uniform(-0.5, 0.5),
        "gamma": rng.uniform(0, 0.5),
    }
    terms1 = {k: float(v) for k, v in terms1.items()}
    gamma = float(rng.uniform(-0.5, 1.0))
    terms2 = {**terms1, "abs_affine_x": [float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))]}
    gen1 = term_generator(terms1, gamma=gamma, measure=measure, name="f1")
    gen2 = term_generator(terms2, gamma=gamma, measure=measure, name="f1 + |p + q x|")
    c0, w = float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))
    term = TerminalSpec(AffineTerminal(c0, (w,)), max(abs(c0), abs(w)), "affine")
    return RandomPair(gen1, gen2, term, terms1, terms2)


def comparison_sweep(n_pairs: int = 20, seed: int = 0, *, n_paths: int = 10_000,
                     n_steps: int = 100, workers: int = 1) -> list[tuple[RandomPair, ComparisonReport]]:
    """Randomised audited pairs solved on common random numbers.

    Pair ``k`` uses path seed ``seed + k``; the drivers come from one
    generator seeded with ``seed``.
    """
    measure = single_jump(1.0, 1.0)
    model = constant_model(sigma=1.0, jump=1.0)
    grid = TimeGrid(0.0, 1.0, n_steps)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pairs):
        pair = random_pair(rng, measure)
        mc = MCParams(n_paths=n_paths, seed=seed + k, workers=workers)
        cfg = {"pair": k, "terms1": pair.terms1, "terms2": pair.terms2}
        rep = run_comparison(pair.gen1, pair.gen2, pair.terminal, pair.terminal, model, measure,
                             grid, mc, config=cfg)
        out.append((pair, rep))
    return out


def converse_preset_run(seed: int, *, n_paths: int = 10_000, workers: int = 1) -> ComparisonReport:
    """Constant drivers ``1`` and ``0`` localised at ``(0, 0)`` with
    ``eta = 0.5``, ``delta = 0.25``."""
    measure = single_jump(1.0, 1.0)
    model = constant_model(sigma=1.0, jump=0.5)
    grid = TimeGrid(0.0, 1.0, 100)
    term = TerminalSpec(AffineTerminal(0.0, (1.0,)), 1.0, "identity")
    mc = MCParams(n_paths=n_paths, seed=seed, workers=workers)
    return run_converse_experiment(constant_generator(1.0), zero_generator(), model, measure, term,
                                   0.0, [0.0], 0.5, 0.25, grid, mc, config={"seed": seed})


def linear_ode_error(n_steps: int, seed: int, *, rho: float = 0.5, n_paths: int = 10_000) -> float:
    """``|Y_0 - exp(-rho)|`` for ``f = -rho y``, ``xi = 1``, ``T = 1``."""
    measure = single_jump(1.0, 1.0)
    bundle = simulate_paths(constant_model(sigma=1.0, jump=1.0), measure,
                            TimeGrid(0.0, 1.0, n_steps), n_paths, seed)
    sol = solve_backward(bundle, linear_ode_generator(rho), measure, np.ones(n_paths))
    return abs(sol.y0 - float(np.exp(-rho)))


def refinement_ladder(steps=(50, 100, 200), seeds=REFINEMENT_SEEDS, *, n_paths: int = 10_000) -> dict:
    """Median linear-ODE error over ``seeds`` for each step count."""
    table = {n: [linear_ode_error(n, s, n_paths=n_paths) for s in seeds] for n in steps}
    return {n: {"errors": errs, "median": float(np.median(errs))} for n, errs in table.items()}


__all__ = [
    "CONVERSE_SEEDS", "REFINEMENT_SEEDS", "RandomPair", "comparison_sweep", "converse_preset_run",
    "linear_ode_error", "random_pair", "refinement_ladder",
]
