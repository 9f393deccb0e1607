"""Ridge-regularised least squares on monomial bases.

The state is standardised per coordinate before building monomials, the
intercept is never penalised (so fitted values always average to the
response mean), and constant responses are returned exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import RegressionError

_DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class RegressionBasis:
    """Monomials of total degree ``<= degree`` in the standardised state.

    The penalty is ``ridge * n_samples * |beta|^2`` over the non-intercept
    coefficients, which keeps ``ridge`` comparable across path counts.
    """

    degree: int = 2
    ridge: float = 1e-8

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def exponents(self, m: int) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []
        for deg in range(self.degree + 1):
            out.extend(combinations_with_replacement(range(m), deg))
        return out

    def design(self, xs: np.ndarray) -> np.ndarray:
        n, m = xs.shape
        cols = [np.prod(xs[:, list(e)], axis=1) if e else np.ones(n) for e in self.exponents(m)]
        return np.stack(cols, axis=1)

    def fit(self, x: np.ndarray, responses: np.ndarray, *, label: str = "") -> "NodeFit":
        """Regress each column of ``responses`` (n, k) on the basis in ``x`` (n, m)."""
        x = np.asarray(x, float)
        R = np.asarray(responses, float)
        if R.ndim == 1:
            R = R[:, None]
        n = x.shape[0]
        if n == 0:
            raise RegressionError(f"empty regression {label}")
        if not (np.isfinite(x).all() and np.isfinite(R).all()):
            raise RegressionError(f"non-finite regression input {label}")
        lo, hi = x.min(axis=0), x.max(axis=0)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        active = std > _DEGENERATE_RTOL * (1.0 + np.abs(mean))
        constant_cols = np.ptp(R, axis=0) == 0
        k = R.shape[1]
        if not active.any():
            coef = np.where(constant_cols, R[0], R.mean(axis=0))[None, :]
            return NodeFit(self, mean, np.ones_like(std), active, coef, lo, hi)
        xs = (x[:, active] - mean[active]) / std[active]
        A = self.design(xs)
        p = A.shape[1]
        coef = np.zeros((p, k))
        coef[0, constant_cols] = R[0, constant_cols]
        todo = np.flatnonzero(~constant_cols)
        if todo.size:
            if self.ridge > 0 and p > 1:
                pen = np.sqrt(self.ridge * n) * np.eye(p)[1:]
                A_aug = np.vstack([A, pen])
                R_aug = np.vstack([R[:, todo], np.zeros((p - 1, todo.size))])
            else:
                A_aug, R_aug = A, R[:, todo]
            try:
                sol, *_ = np.linalg.lstsq(A_aug, R_aug, rcond=None)
            except np.linalg.LinAlgError as exc:
                raise RegressionError(f"least squares failed {label}: {exc}") from exc
            if not np.isfinite(sol).all():
                raise RegressionError(f"non-finite regression coefficients {label}")
            coef[:, todo] = sol
        return NodeFit(self, mean, std, active, coef, lo, hi)


@dataclass(frozen=True, eq=False)
class NodeFit:
    """Fitted coefficients for one grid node; ``coef`` has shape ``(p, k)``."""

    basis: RegressionBasis
    mean: np.ndarray
    std: np.ndarray
    active: np.ndarray
    coef: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def degenerate(self) -> bool:
        return not self.active.any()

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        if self.degenerate:
            return np.broadcast_to(self.coef[0], (x.shape[0], self.coef.shape[1])).copy()
        xs = (x[:, self.active] - self.mean[self.active]) / self.std[self.active]
        return self.basis.design(xs) @ self.coef

    def in_cloud(self, x: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """True where ``x`` lies in the bounding box of the fitted sample."""
        x = np.atleast_2d(np.asarray(x, float))
        slack = rtol * (1.0 + np.abs(self.upper - self.lower))
        return np.all((x >= self.lower - slack) & (x <= self.upper + slack), axis=1)
