"""Density discrepancies on a grid and predictive criteria from log-likelihood draws."""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .errors import DimensionError, DomainError

Q_FLOOR = 1e-300


@dataclass(frozen=True)
class GridDensity:
    """Density values on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise DimensionError("grid and values must be 1-d of equal length")
        if g.size < 2 or np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("density values must be finite and nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def mass(self):
        return float(trapezoid(self.values, self.grid))


def _pair(p, q):
    if not isinstance(p, GridDensity):
        p = GridDensity(*p)
    if not isinstance(q, GridDensity):
        q = GridDensity(*q)
    if p.grid.shape != q.grid.shape or not np.array_equal(p.grid, q.grid):
        raise DimensionError("densities must share a grid")
    return p, q


def kl_divergence_grid(p, q):
    """``KL(p || q)`` by the trapezoid rule; ``q`` is floored at 1e-300.

    ``p`` and ``q`` are :class:`GridDensity` or ``(grid, values)`` pairs.
    """
    p, q = _pair(p, q)
    pv, qv = p.values, np.maximum(q.values, Q_FLOOR)
    f = np.zeros_like(pv)
    pos = pv > 0
    f[pos] = pv[pos] * (np.log(pv[pos]) - np.log(qv[pos]))
    return float(max(trapezoid(f, p.grid), 0.0))


def hellinger_grid(p, q):
    """Hellinger distance, clamped to [0, 1].

    Computed as ``sqrt(0.5 * int (sqrt p - sqrt q)^2)``, which equals
    ``sqrt(1 - int sqrt(p q))`` for normalized densities but stays exactly
    zero for ``p == q`` when the grid truncates some mass.
    """
    p, q = _pair(p, q)
    h2 = 0.5 * trapezoid((np.sqrt(p.values) - np.sqrt(q.values)) ** 2, p.grid)
    return float(np.sqrt(min(max(h2, 0.0), 1.0)))


def _check_loglik(loglik, min_rows=1):
    ll = np.asarray(loglik, dtype=float)
    if ll.ndim != 2:
        raise DimensionError("log-likelihood must be a (states x observations) matrix")
    if ll.shape[0] < min_rows:
        raise DomainError(f"need at least {min_rows} stored states")
    if not np.all(np.isfinite(ll)):
        raise DomainError("log-likelihood contains non-finite entries")
    return ll


def log_cpo(loglik):
    """Per-observation log conditional predictive ordinate (harmonic-mean estimator)."""
    ll = _check_loglik(loglik)
    return -logsumexp(-ll, axis=0) + np.log(ll.shape[0])


def lpml(loglik):
    """Log pseudo-marginal likelihood; higher is better."""
    return float(log_cpo(loglik).sum())


def waic(loglik):
    """WAIC on the deviance scale with the variance penalty; lower is better."""
    ll = _check_loglik(loglik, min_rows=2)
    S = ll.shape[0]
    lppd = logsumexp(ll, axis=0) - np.log(S)
    p_waic = ll.var(axis=0, ddof=1)
    return float(-2.0 * np.sum(lppd - p_waic))


def pmse(predicted, observed):
    """Mean squared prediction error."""
    a = np.asarray(predicted, dtype=float).ravel()
    b = np.asarray(observed, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError("predicted and observed lengths differ")
    if a.size == 0:
        raise DomainError("need at least one prediction")
    return float(np.mean((a - b) ** 2))
