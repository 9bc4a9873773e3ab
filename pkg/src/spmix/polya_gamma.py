r"""Pólya-Gamma random variables.

``PG(1, c)`` draws use the alternating-series rejection sampler on the
exponentially tilted Jacobi density (Devroye's method as adapted by
Polson, Scott & Windle). ``PG(b, c)`` for integer ``b`` is the sum of ``b``
independent ``PG(1, c)`` draws. Above ``EXACT_MAX_B`` the sum is replaced
by a Gaussian with matching mean and variance; callers that care can ask
:func:`uses_approximation`.

The truncated defining series

.. math::

    \omega = \frac{1}{2\pi^2}\sum_{k=1}^{K}
        \frac{g_k}{(k - 1/2)^2 + c^2/(4\pi^2)}, \qquad g_k \sim \mathrm{Gamma}(b, 1)

is exposed as :func:`series_oracle_sample` for testing only.
"""

import math

import numpy as np
from numba import njit

from .errors import DomainError

EXACT_MAX_B = 170

_TRUNC = 0.64
_TRUNC_RECIP = 1.0 / _TRUNC
_PI = math.pi


@njit(cache=True)
def _log_norm_cdf(x):
    return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))


@njit(cache=True)
def _a_coef(n, x):
    k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (math.log(0.5 * _PI) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return math.exp(expnt)
    return 0.0


@njit(cache=True)
def _mass_texpon(z):
    t = _TRUNC
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@njit(cache=True)
def _rtigauss(z, rng):
    # inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC)
    t = _TRUNC
    x = t + 1.0
    if _TRUNC_RECIP > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@njit(cache=True)
def pg1_draw(c, rng):
    """One exact ``PG(1, c)`` draw."""
    z = abs(c) * 0.5
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    p_exp = _mass_texpon(z)
    while True:
        if rng.random() < p_exp:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _a_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


@njit(cache=True)
def _pg_var_unit(c):
    # Var PG(1, c) = (sinh c - c) / (4 c^3 cosh^2(c/2))
    c = abs(c)
    if c < 1e-2:
        c2 = c * c
        r = 1.0 / 6.0 + c2 / 120.0 + c2 * c2 / 5040.0
    else:
        r = (math.sinh(c) - c) / (c * c * c)
    ch = math.cosh(0.5 * c)
    return 0.25 * r / (ch * ch)


@njit(cache=True)
def _pg_mean_unit(c):
    c = abs(c)
    if c < 1e-6:
        return 0.25 - c * c / 48.0
    return math.tanh(0.5 * c) / (2.0 * c)


@njit(cache=True)
def pg_draw(b, c, rng, exact_max_b):
    """``PG(b, c)`` for integer ``b >= 0``; ``PG(0, c)`` is the point mass at 0."""
    if b <= 0:
        return 0.0
    if b > exact_max_b:
        m = b * _pg_mean_unit(c)
        sd = math.sqrt(b * _pg_var_unit(c))
        x = m + sd * rng.standard_normal()
        return x if x > 1e-12 else 1e-12
    out = 0.0
    for _ in range(b):
        out += pg1_draw(c, rng)
    return out


@njit(cache=True)
def _pg_draw_many(b, c, n, rng, exact_max_b):
    out = np.empty(n)
    for i in range(n):
        out[i] = pg_draw(b, c, rng, exact_max_b)
    return out


def _check_b(b):
    if not b > 0:
        raise DomainError(f"PG shape b must be positive, got {b!r}")
    if int(b) != b:
        raise DomainError("exact sampling needs an integer shape b")
    return int(b)


def sample_pg(b, c, rng, size=None, exact_max_b=EXACT_MAX_B):
    """Draw from ``PG(b, c)``.

    Parameters
    ----------
    b : int
        Positive integer shape.
    c : float
        Tilting parameter.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws; a scalar is returned when omitted.
    exact_max_b : int
        Largest ``b`` summed exactly; larger shapes use the moment-matched
        Gaussian.
    """
    b = _check_b(b)
    if size is None:
        return float(pg_draw(b, float(c), rng, exact_max_b))
    return _pg_draw_many(b, float(c), int(size), rng, exact_max_b)


def uses_approximation(b, exact_max_b=EXACT_MAX_B):
    return b > exact_max_b


def pg_mean(b, c):
    """``E[PG(b, c)] = b / (2c) tanh(c / 2)``, with the ``c = 0`` limit ``b / 4``."""
    if not b > 0:
        raise DomainError("b must be positive")
    if c == 0:
        return b / 4.0
    return b / (2.0 * c) * math.tanh(c / 2.0)


def pg_variance(b, c):
    return b * _pg_var_unit(float(c))


def series_oracle_sample(b, c, rng, n_terms=10_000, size=None):
    """Truncated-series ``PG(b, c)`` draws. Test oracle; never used by the sampler.

    Truncating after ``K`` terms biases the mean downward by less than
    ``b / (2 pi^2 K)``.
    """
    if n_terms < 1000:
        raise DomainError("the series oracle needs at least 1000 terms")
    if not b > 0:
        raise DomainError("b must be positive")
    k = np.arange(1, n_terms + 1)
    denom = (k - 0.5) ** 2 + c * c / (4.0 * math.pi**2)
    n = 1 if size is None else int(size)
    out = np.empty(n)
    # chunk to bound memory at n_terms * chunk doubles
    chunk = max(1, 2_000_000 // n_terms)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        g = rng.gamma(b, 1.0, size=(e - s, n_terms))
        out[s:e] = (g / denom).sum(axis=1) / (2.0 * math.pi**2)
    return float(out[0]) if size is None else out
