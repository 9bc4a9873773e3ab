"""Monte Carlo helpers shared by priors, samplers and tests."""

import numpy as np
import scipy.linalg as sla
from scipy.special import ndtr, ndtri

from .errors import ParameterError


def batch_means_se(x, n_batches=100):
    """Standard error of the mean of ``x`` (along axis 0) by batch means.

    Trailing observations that do not fill a batch are dropped.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2 * n_batches:
        n_batches = max(2, n // 2)
    size = n // n_batches
    means = x[: size * n_batches].reshape((n_batches, size) + x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def mc_covariance(x, y, n_batches=100):
    """Sample covariance of paired draws and its batch-means standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.mean()), float(batch_means_se(prod, n_batches))


def cholesky_spd(m, what="matrix"):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ParameterError(f"{what} is not symmetric positive definite") from exc


def sample_wishart_chol(df, scale_chol, rng):
    """Lower factor ``L A`` of a Wishart(df, L L^T) draw via the Bartlett decomposition."""
    p = scale_chol.shape[0]
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    A[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    return scale_chol @ A


def sample_inverse_wishart(df, scale, rng):
    """Draw ``S ~ Inv-Wishart(df, scale)``, density proportional to
    ``|S|^{-(df+p+1)/2} exp(-tr(scale S^{-1})/2)``; mean ``scale / (df - p - 1)``.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    p = scale.shape[0]
    if df <= p - 1:
        raise ParameterError(f"inverse-Wishart needs df > {p - 1}, got {df}")
    # S^{-1} ~ Wishart(df, scale^{-1})
    Lsi = cholesky_spd(np.linalg.inv(scale), "inverse-Wishart scale")
    W_chol = sample_wishart_chol(df, Lsi, rng)
    W_chol_inv = sla.solve_triangular(W_chol, np.eye(p), lower=True)
    S = W_chol_inv.T @ W_chol_inv
    return 0.5 * (S + S.T)


def truncnorm_unit_interval(mean, sd, rng):
    """Normal(mean, sd) restricted to (0, 1), by inverting the CDF with one uniform."""
    lo, hi = ndtr(-mean / sd), ndtr((1.0 - mean) / sd)
    x = mean + sd * ndtri(lo + (hi - lo) * rng.random())
    return float(min(max(x, 1e-12), 1.0 - 1e-12))


def truncnorm_unit_log_mass(mean, sd):
    """``log P(0 < N(mean, sd^2) < 1)``."""
    return float(np.log(ndtr((1.0 - mean) / sd) - ndtr(-mean / sd)))
