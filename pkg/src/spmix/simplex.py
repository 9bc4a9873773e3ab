r"""Aitchison geometry on the simplex.

Compositions are stored as plain numpy arrays whose last axis holds the
``H`` parts, so every function here also works row-wise on a stack of
compositions. The additive log-ratio chart uses the last part as reference:

.. math::

    \mathrm{alr}(w)_j = \log(w_j / w_H), \qquad j = 1, \ldots, H - 1.
"""

import numpy as np

from .errors import BoundaryError, DimensionError, DomainError

SUM_TOL = 1e-10


def _as_parts(v):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] < 2:
        raise DimensionError("a composition needs at least 2 parts")
    return v


def _check_interior(w, name="w"):
    if np.any(w <= 0):
        raise BoundaryError(f"{name} has zero or negative parts; log-ratios are undefined")


def closure(v):
    """Normalize positive vectors so that their parts sum to one.

    Parameters
    ----------
    v : array_like, shape (..., H)
        Strictly positive entries.

    Returns
    -------
    numpy.ndarray
        ``v / v.sum(axis=-1)``.
    """
    v = _as_parts(v)
    if np.any(~(v > 0)):
        raise DomainError("closure requires strictly positive entries")
    return v / v.sum(axis=-1, keepdims=True)


def as_simplex(w):
    """Validate a composition, renormalizing sums that are off by less than 1e-10."""
    w = _as_parts(w)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("compositions must have finite nonnegative parts")
    s = w.sum(axis=-1, keepdims=True)
    if np.any(np.abs(s - 1.0) > SUM_TOL):
        raise DomainError(f"parts sum to {np.ravel(s)[0]!r}, not 1")
    return w / s


def is_simplex(w, tol=SUM_TOL):
    w = np.asarray(w, dtype=float)
    return bool(
        w.ndim >= 1
        and w.shape[-1] >= 2
        and np.all(w >= 0)
        and np.all(np.abs(w.sum(axis=-1) - 1.0) <= tol)
    )


def alr(w):
    """Additive log-ratio transform with the last part as reference."""
    w = _as_parts(w)
    _check_interior(w)
    logw = np.log(w)
    return logw[..., :-1] - logw[..., -1:]


def alr_inv(wt):
    """Inverse alr: softmax of ``(wt, 0)``.

    The maximum is subtracted before exponentiating, so entries of a few
    hundred in magnitude do not overflow.
    """
    wt = np.asarray(wt, dtype=float)
    if wt.ndim == 0:
        raise DimensionError("alr coordinates must be at least 1-d")
    if not np.all(np.isfinite(wt)):
        raise DomainError("alr coordinates must be finite")
    full = np.concatenate([wt, np.zeros(wt.shape[:-1] + (1,))], axis=-1)
    full -= full.max(axis=-1, keepdims=True)
    e = np.exp(full)
    return e / e.sum(axis=-1, keepdims=True)


def _log_closure(logv):
    # closure of exp(logv); shifting by the max keeps the product in range
    e = np.exp(logv - logv.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def perturb(w1, w2):
    """Aitchison addition: closure of the elementwise product."""
    w1, w2 = _as_parts(w1), _as_parts(w2)
    if w1.shape[-1] != w2.shape[-1]:
        raise DimensionError("compositions differ in number of parts")
    _check_interior(w1, "w1")
    _check_interior(w2, "w2")
    return _log_closure(np.log(w1) + np.log(w2))


def power(alpha, w):
    """Aitchison scalar multiplication: closure of ``w ** alpha``."""
    w = _as_parts(w)
    _check_interior(w)
    return _log_closure(alpha * np.log(w))


def aitchison_inner(w1, w2):
    r"""Aitchison inner product
    :math:`\frac{1}{2H}\sum_{i,j}\log\frac{w_{1i}}{w_{1j}}\log\frac{w_{2i}}{w_{2j}}`.
    """
    w1, w2 = _as_parts(w1), _as_parts(w2)
    if w1.shape[-1] != w2.shape[-1]:
        raise DimensionError("compositions differ in number of parts")
    _check_interior(w1, "w1")
    _check_interior(w2, "w2")
    H = w1.shape[-1]
    l1, l2 = np.log(w1), np.log(w2)
    r1 = l1[..., :, None] - l1[..., None, :]
    r2 = l2[..., :, None] - l2[..., None, :]
    return (r1 * r2).sum(axis=(-2, -1)) / (2 * H)
