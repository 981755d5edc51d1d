"""
Multi-start damped least squares for the robust-family conditions.

Each family supplies a residual vector (zero-error mismatch plus error
derivatives up to the requested order).  Roots from all seeds are pooled,
de-duplicated and ranked by the next-order residual, then by total area, then
by seed index, so the outcome is deterministic for a fixed seed list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import series

ROOT_TOL = 1e-9
MAX_ITER = 500
TWO_PI = 2.0 * math.pi


class SolverError(RuntimeError):
    """No seed converged to a root below the residual gate."""


@dataclass(frozen=True)
class Root:
    x: tuple
    residual: float
    next_residual: float
    area: float
    seed_index: int


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so seed lists are reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))


def random_seeds(n: int, dim: int, lo: float, hi: float, seed: int) -> np.ndarray:
    return make_rng(seed).uniform(lo, hi, size=(n, dim))


def alignment(q: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Sign-free mismatch: the six 2x2 minors of ``[q, target]``.

    All vanish iff ``q = +-target``; unlike ``q - sign * target`` this is
    smooth everywhere.
    """
    o = np.outer(q, target)
    return (o - o.T)[np.triu_indices(4, 1)]


def derivative_residual(elements, target: np.ndarray, axis, order: int) -> np.ndarray:
    """Zero-error mismatch followed by derivatives 1..order along ``axis``."""
    d = series.derivatives(elements, axis, order)
    return np.concatenate([alignment(d[0], target), d[1:].ravel()])


def next_order_residual(elements, axis, order: int) -> float:
    """Largest component of the derivative of order ``order + 1``."""
    d = series.derivatives(elements, axis, order + 1)
    return float(np.max(np.abs(d[-1])))


def wrap(x: np.ndarray) -> np.ndarray:
    return np.mod(x, TWO_PI)


def _same(a: np.ndarray, b: np.ndarray, periodic: bool, tol: float = 1e-7) -> bool:
    d = np.abs(a - b)
    if periodic:
        d = np.minimum(d % TWO_PI, TWO_PI - d % TWO_PI)
    return bool(np.all(d < tol))


def find_roots(residual: Callable[[np.ndarray], np.ndarray], seeds: Sequence,
               *, bounds: tuple | None = None, periodic: bool = False,
               next_residual: Callable[[np.ndarray], float] | None = None,
               area: Callable[[np.ndarray], float] | None = None,
               tol: float = ROOT_TOL, max_iter: int = MAX_ITER) -> list:
    """Run damped least squares from every seed; return distinct roots, best first.

    ``bounds`` selects the trust-region reflective method on a box; without
    bounds Levenberg-Marquardt is used and, for ``periodic`` unknowns, the
    roots are wrapped to ``[0, 2 pi)``.
    """
    roots: list = []
    for idx, seed in enumerate(seeds):
        x0 = np.asarray(seed, dtype=float)
        dim = x0.size
        try:
            if bounds is not None:
                lo, hi = (np.asarray(b, float) for b in bounds)
                x0 = np.clip(x0, lo + 1e-12, hi - 1e-12)
                sol = least_squares(residual, x0, bounds=(lo, hi), method="trf",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                    max_nfev=max_iter * (dim + 1))
            else:
                sol = least_squares(residual, x0, method="lm", xtol=1e-15, ftol=1e-15,
                                    gtol=1e-15, max_nfev=max_iter * (dim + 1))
        except (ValueError, np.linalg.LinAlgError):
            continue
        x = wrap(sol.x) if periodic else sol.x
        res = float(np.max(np.abs(residual(x))))
        if not res < tol:
            continue
        if any(_same(x, np.asarray(r.x), periodic) for r in roots):
            continue
        nxt = next_residual(x) if next_residual else 0.0
        ar = area(x) if area else 0.0
        roots.append(Root(tuple(float(v) for v in x), res, float(nxt), float(ar), idx))
    roots.sort(key=lambda r: (round(r.next_residual, 9), round(r.area, 9), r.seed_index))
    return roots


def numeric_jacobian(residual: Callable, x: np.ndarray, h: float = 1e-7) -> np.ndarray:
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((residual(x + e) - residual(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def project_to_roots(residual: Callable, x0, *, tol: float = ROOT_TOL,
                     max_iter: int = 50, rcond: float = 1e-3) -> np.ndarray | None:
    """Minimal-norm Gauss-Newton projection of ``x0`` onto the root set.

    On a continuum of roots this returns (to first order) the nearest root,
    where damped least squares may drift along the continuum.  Returns None
    when the iteration does not reach ``tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        r = residual(x)
        if np.max(np.abs(r)) < 1e-3 * tol:
            break
        step = np.linalg.pinv(numeric_jacobian(residual, x), rcond=rcond) @ r
        x = x - step
        if not np.all(np.isfinite(x)):
            return None
    return x if np.max(np.abs(residual(x))) < tol else None
