"""Spatial Gaussian mixture: priors, data container, Gibbs state and densities.

Area ``i`` has density ``sum_h w_ih N(y | mu_h + shift, sigma2_h)`` with
``w_i = alr_inv(w_tilde_i)``. The shift is zero (plain), ``beta' x`` (M1,
a global regression) or ``beta_h' x`` (M2, component-specific slopes).
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, DimensionError, DomainError, ParameterError
from .graph import ProximityGraph
from .simplex import alr_inv

VARIANTS = ("plain", "m1", "m2")
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the full hierarchical model.

    Attributes
    ----------
    H : int
        Number of mixture components.
    mu0, lam, a, b : float
        Normal-inverse-gamma base measure: ``sigma2 ~ IG(a, b)``,
        ``mu | sigma2 ~ N(mu0, sigma2 / lam)``.
    nu, V : float, ndarray
        Inverse-Wishart prior on ``Sigma``. ``V=None`` means identity.
    eta2 : float
        Prior variance of the per-component means ``m_tilde``.
    rho_a, rho_b : float
        Beta prior on ``rho``.
    variant : {"plain", "m1", "m2"}
    sigma2_beta : float
        Prior variance of the shared coefficients under M1.
    m2_coef_scale : float
        Under M2, ``(mu_h, beta_h) | sigma2_h ~ N(0, m2_coef_scale * sigma2_h * I)``
        and ``sigma2_h ~ IG(m2_a, m2_b)``.
    """

    H: int = 10
    mu0: float = 0.0
    lam: float = 0.1
    a: float = 2.0
    b: float = 2.0
    nu: float = 100.0
    V: np.ndarray = None
    eta2: float = 9.0
    rho_a: float = 1.0
    rho_b: float = 1.0
    variant: str = "plain"
    sigma2_beta: float = 10.0
    m2_coef_scale: float = 10.0
    m2_a: float = 2.0
    m2_b: float = 2.0

    def __post_init__(self):
        if int(self.H) != self.H or self.H < 1:
            raise ParameterError("H must be a positive integer")
        object.__setattr__(self, "H", int(self.H))
        if self.variant not in VARIANTS:
            raise ParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("lam", "a", "b", "eta2", "rho_a", "rho_b", "sigma2_beta",
                     "m2_coef_scale", "m2_a", "m2_b"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not self.nu > self.H - 2:
            raise ParameterError("nu must exceed H - 2")
        V = np.eye(self.H - 1) if self.V is None else np.atleast_2d(np.asarray(self.V, float))
        if V.shape != (self.H - 1, self.H - 1):
            raise DimensionError("V must be (H - 1) x (H - 1)")
        if self.H > 1:
            if not np.allclose(V, V.T):
                raise ParameterError("V must be symmetric")
            try:
                np.linalg.cholesky(V)
            except np.linalg.LinAlgError as exc:
                raise ParameterError("V must be positive definite") from exc
        object.__setattr__(self, "V", V)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["V"] = self.V.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("V") is not None:
            d["V"] = np.asarray(d["V"], dtype=float)
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``y`` tagged with 0-based ``area`` labels and optional covariates."""

    y: np.ndarray
    area: np.ndarray
    graph: ProximityGraph
    x: np.ndarray = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        area = np.asarray(self.area).ravel()
        if y.shape != area.shape:
            raise DimensionError("y and area must have equal length")
        if not np.all(np.isfinite(y)):
            raise DataError("responses must be finite")
        if area.size and (not np.issubdtype(area.dtype, np.integer)):
            if not np.all(area == np.round(area)):
                raise DataError("area labels must be integers")
        area = area.astype(np.int64)
        I = self.graph.n_areas
        if area.size and (area.min() < 0 or area.max() >= I):
            raise DataError(f"area labels must lie in 0..{I - 1}")
        x = self.x
        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != y.size:
                raise DimensionError("covariate rows must match observations")
            if not np.all(np.isfinite(x)):
                raise DataError("covariates must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "area", area)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_groups(cls, groups, graph, covariates=None):
        """Build from a list of per-area response arrays (and matching covariate blocks)."""
        if len(groups) != graph.n_areas:
            raise DataError("one response vector per area is required")
        y = np.concatenate([np.asarray(g, dtype=float).ravel() for g in groups])
        area = np.concatenate([np.full(len(np.ravel(g)), i) for i, g in enumerate(groups)])
        x = None
        if covariates is not None:
            x = np.vstack([np.atleast_2d(np.asarray(c, float).reshape(len(np.ravel(g)), -1))
                           for c, g in zip(covariates, groups)])
        return cls(y=y, area=area.astype(np.int64), graph=graph, x=x)

    @property
    def n_obs(self):
        return self.y.size

    @property
    def n_areas(self):
        return self.graph.n_areas

    @property
    def n_covariates(self):
        return 0 if self.x is None else self.x.shape[1]

    @property
    def counts(self):
        return np.bincount(self.area, minlength=self.n_areas)

    def group(self, i):
        return self.y[self.area == i]

    def subset(self, idx):
        idx = np.asarray(idx)
        x = None if self.x is None else self.x[idx]
        return Dataset(self.y[idx], self.area[idx], self.graph, x)


@dataclass
class MixtureState:
    """One Gibbs state. ``alloc`` holds 0-based component labels."""

    mu: np.ndarray
    sigma2: np.ndarray
    w_tilde: np.ndarray
    alloc: np.ndarray
    sigma: np.ndarray
    rho: float
    m_tilde: np.ndarray
    beta: np.ndarray = None
    beta_h: np.ndarray = None

    @property
    def H(self):
        return self.mu.size

    @property
    def n_areas(self):
        return self.w_tilde.shape[0]

    def weights(self):
        return alr_inv(self.w_tilde)

    def atom(self, h):
        bh = None if self.beta_h is None else self.beta_h[h].copy()
        return float(self.mu[h]), float(self.sigma2[h]), bh

    def copy(self):
        return replace(self, **{
            k: (v.copy() if isinstance(v, np.ndarray) else v)
            for k, v in self.__dict__.items()
        })

    def validate(self):
        if np.any(~(self.sigma2 > 0)):
            raise DomainError("kernel variances must be positive")
        if not np.all(np.isfinite(self.w_tilde)):
            raise DomainError("transformed weights must be finite")
        if self.alloc.size and (self.alloc.min() < 0 or self.alloc.max() >= self.H):
            raise DomainError("allocation out of range")
        if not (0.0 < self.rho < 1.0):
            raise DomainError("rho must lie in (0, 1)")
        if self.H > 1:
            np.linalg.cholesky(self.sigma)


def _check_covariates(variant, x, d_expected):
    if variant == "plain":
        return
    if x is None:
        raise DataError(f"variant {variant!r} needs covariates")
    if x.shape[-1] != d_expected:
        raise DimensionError(f"expected {d_expected} covariates, got {x.shape[-1]}")


def _variant(state):
    if state.beta_h is not None:
        return "m2"
    if state.beta is not None:
        return "m1"
    return "plain"


def kernel_shift(state, x):
    """Per-observation, per-component mean shift, shape ``(n, H)`` (or ``(n, 1)``)."""
    variant = _variant(state)
    if variant == "plain":
        return np.zeros((1 if x is None else np.atleast_2d(x).shape[0], 1))
    if x is None:
        raise DataError(f"variant {variant!r} needs covariates")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if variant == "m1":
        _check_covariates(variant, x, state.beta.size)
        return (x @ state.beta)[:, None]
    _check_covariates(variant, x, state.beta_h.shape[1])
    return x @ state.beta_h.T


def log_kernel(y, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def component_log_density(state, y, x=None):
    """``log N(y_j | mu_h + shift_jh, sigma2_h)``, shape ``(n, H)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shift = kernel_shift(state, x)
    return log_kernel(y[:, None], state.mu[None, :] + shift, state.sigma2[None, :])


def log_mixture_density(state, area, y, x=None):
    """Log mixture density of area ``area`` at the points ``y``."""
    if not 0 <= area < state.n_areas:
        raise DomainError("area index out of range")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x is not None and np.ndim(x) == 1 and _variant(state) != "plain":
        x = np.broadcast_to(np.asarray(x, float), (y.size, len(x)))
    logw = np.log(alr_inv(state.w_tilde[area]))
    return logsumexp(component_log_density(state, y, x) + logw[None, :], axis=1)


def mixture_density(state, area, y, x=None):
    """Mixture density of one area; ``x`` is a covariate row (or one row per point)."""
    return np.exp(log_mixture_density(state, area, y, x))


def log_likelihood_matrix(state, data):
    """Per-observation log mixture density under ``state``, shape ``(n,)``."""
    logw = np.log(state.weights())
    comp = component_log_density(state, data.y, data.x)
    return logsumexp(comp + logw[data.area], axis=1)


@dataclass
class Chain:
    """Stored post burn-in states, stacked along axis 0, plus log-likelihood rows."""

    mu: np.ndarray
    sigma2: np.ndarray
    w_tilde: np.ndarray
    alloc: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    m_tilde: np.ndarray
    loglik: np.ndarray
    iterations: np.ndarray
    beta: np.ndarray = None
    beta_h: np.ndarray = None
    info: dict = field(default_factory=dict)

    STATE_FIELDS = ("mu", "sigma2", "w_tilde", "alloc", "sigma", "rho", "m_tilde", "beta", "beta_h")

    def __len__(self):
        return self.mu.shape[0]

    @classmethod
    def from_states(cls, states, loglik=None, iterations=None, info=None):
        if not states:
            raise DomainError("a chain needs at least one state")
        kw = {}
        for name in cls.STATE_FIELDS:
            vals = [getattr(s, name) for s in states]
            kw[name] = None if vals[0] is None else np.stack([np.asarray(v) for v in vals])
        S = len(states)
        kw["loglik"] = np.zeros((S, 0)) if loglik is None else np.asarray(loglik, float)
        kw["iterations"] = np.arange(S) if iterations is None else np.asarray(iterations)
        return cls(**kw, info=dict(info or {}))

    def state(self, s):
        kw = {}
        for name in self.STATE_FIELDS:
            arr = getattr(self, name)
            kw[name] = None if arr is None else np.array(arr[s])
        kw["rho"] = float(kw["rho"])
        return MixtureState(**kw)

    def states(self):
        return [self.state(s) for s in range(len(self))]

    def weights(self):
        return alr_inv(self.w_tilde)


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    mean: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray


def density_draws(chain, area, grid, x=None, chunk=256):
    """Mixture density of ``area`` on ``grid`` for every stored state, shape ``(S, G)``."""
    if len(chain) == 0:
        raise DomainError("empty chain")
    grid = np.asarray(grid, dtype=float)
    w = alr_inv(chain.w_tilde[:, area])  # (S, H)
    S = len(chain)
    out = np.empty((S, grid.size))
    if chain.beta_h is not None:
        x = np.asarray(x, float)
        _check_covariates("m2", x, chain.beta_h.shape[2])
        shift = chain.beta_h @ x  # (S, H)
    elif chain.beta is not None:
        x = np.asarray(x, float)
        _check_covariates("m1", x, chain.beta.shape[1])
        shift = (chain.beta @ x)[:, None]
    else:
        shift = np.zeros((S, 1))
    mean = chain.mu + shift
    for s in range(0, S, chunk):
        e = min(S, s + chunk)
        lk = log_kernel(grid[None, None, :], mean[s:e, :, None], chain.sigma2[s:e, :, None])
        out[s:e] = np.exp(logsumexp(lk + np.log(w[s:e, :, None]), axis=1))
    return out


def posterior_mean_density(chain, area, grid, x=None):
    """Pointwise posterior mean and 95% band of the density of one area."""
    d = density_draws(chain, area, grid, x)
    lo, hi = np.quantile(d, [0.025, 0.975], axis=0)
    return DensityEstimate(np.asarray(grid, float), d.mean(axis=0), lo, hi)


def default_grid(y, n_points=500):
    """Observed range padded by three standard deviations."""
    y = np.asarray(y, dtype=float)
    sd = y.std() if y.size > 1 else 1.0
    sd = sd if sd > 0 else 1.0
    return np.linspace(y.min() - 3 * sd, y.max() + 3 * sd, n_points)


def predictive_mean(chain, area, x=None):
    """Posterior predictive mean of ``y`` for observations in ``area`` (array) with rows ``x``."""
    area = np.atleast_1d(np.asarray(area, dtype=np.int64))
    w = alr_inv(chain.w_tilde)  # (S, I, H)
    base = np.einsum("sih,sh->si", w, chain.mu).mean(axis=0)[area]
    if chain.beta is not None:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return base + x @ chain.beta.mean(axis=0)
    if chain.beta_h is not None:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        # E_s[sum_h w_ih beta_h] per area, then dot with x
        slope = np.einsum("sih,shd->sid", w, chain.beta_h).mean(axis=0)
        return base + np.einsum("nd,nd->n", slope[area], x)
    return base
