"""Closed-form regression suite: each case solves a BSDE whose exact ``Y_0``
is known and checks the Monte Carlo estimate at a pinned tolerance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backward import closed_form_oracle, solve_backward
from .families import (
    constant_generator, constant_model, linear_ode_generator, single_jump, term_generator,
    zero_generator,
)
from .model import TimeGrid
from .paths import simulate_paths


@dataclass
class OracleCase:
    name: str
    estimate: float
    exact: float
    se: float
    tolerance: float
    rule: str

    @property
    def error(self) -> float:
        return abs(self.estimate - self.exact)

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "estimate": self.estimate, "exact": self.exact, "se": self.se,
                "error": self.error, "tolerance": self.tolerance, "rule": self.rule,
                "passed": self.passed}


def run_oracle_suite(n_paths: int = 10_000, seed: int = 0, workers: int = 1) -> list[OracleCase]:
    cases = []
    T = 1.0

    # zero driver, h(x) = x, Brownian plus compensated unit jumps: Y_0 = x0
    meas = single_jump(1.0, 1.0)
    model = constant_model(sigma=1.0, jump=1.0)
    grid = TimeGrid(0.0, T, 100)
    b = simulate_paths(model, meas, grid, n_paths, seed, workers=workers)
    s = solve_backward(b, zero_generator(measure=meas), meas, b.states[:, -1, 0])
    exact = float(closed_form_oracle("zero_driver_martingale")(0.0, np.zeros(1))[0][0])
    cases.append(OracleCase("zero_driver_martingale", s.y0, exact, s.se, 3 * s.se, "3 SE"))

    # constant driver on a dyadic grid: exact in floating point
    grid64 = TimeGrid(0.0, T, 64)
    b = simulate_paths(model, meas, grid64, n_paths, seed, workers=workers)
    s = solve_backward(b, constant_generator(1.0), meas, np.zeros(n_paths))
    exact = float(closed_form_oracle("constant_driver", k=1.0, T=T)(0.0, np.zeros(1))[0][0])
    cases.append(OracleCase("constant_driver", s.y0, exact, s.se, 0.0, "exact"))

    # linear ODE driver: explicit Euler bias only
    s = solve_backward(simulate_paths(model, meas, grid, n_paths, seed, workers=workers),
                       linear_ode_generator(0.5), meas, np.ones(n_paths))
    exact = float(closed_form_oracle("linear_ode", rho=0.5, T=T)(0.0, np.zeros(1))[0][0])
    cases.append(OracleCase("linear_ode", s.y0, exact, s.se, 0.01, "0.01 absolute"))

    # f1 = Gamma with gamma = 1, pure unit jumps: Y_0 = x0 + lambda T
    pure = constant_model(sigma=0.0, jump=1.0)
    b = simulate_paths(pure, meas, grid, n_paths, seed, workers=workers)
    gen = term_generator({"gamma": 1.0}, gamma=1.0, measure=meas)
    s = solve_backward(b, gen, meas, b.states[:, -1, 0])
    exact = float(closed_form_oracle("gamma_driver", T=T)(0.0, np.zeros(1))[0][0])
    cases.append(OracleCase("gamma_driver", s.y0, exact, s.se, 3 * s.se + 0.05,
                            "3 SE + 0.05 (Gamma estimator noise)"))
    return cases
