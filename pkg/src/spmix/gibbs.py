"""Blocked Gibbs sampler for the spatial mixture with a logisticMCAR weight prior.

One sweep updates, in this order: allocations, atoms (component
regressions under M2), the shared coefficients (M1), ``Sigma``, ``rho``
(adaptive Metropolis-Hastings), the transformed weights (Pólya-Gamma
augmentation, one coordinate at a time) and the per-component means
``m_tilde``.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numba import njit

from .errors import DataError, NumericalError, SamplerError
from .graph import block_cholesky, car_precision
from .mcutils import (
    cholesky_spd,
    sample_inverse_wishart,
    truncnorm_unit_interval,
    truncnorm_unit_log_mass,
)
from .model import Chain, MixtureState, PriorConfig, component_log_density, log_likelihood_matrix
from .polya_gamma import EXACT_MAX_B, pg_draw


@dataclass(frozen=True)
class ChainConfig:
    """Chain length, seed and MH tuning.

    ``n_samples`` is the number of stored states; the chain runs
    ``n_burnin + n_samples * thin`` sweeps in total.
    """

    n_burnin: int = 10_000
    n_samples: int = 2_000
    thin: int = 5
    seed: int = 0
    rho_sd: float = 0.1
    target_accept: float = 0.44
    adapt: bool = True
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.n_samples < 1 or self.thin < 1 or self.n_burnin < 0:
            raise ValueError("need n_samples >= 1, thin >= 1, n_burnin >= 0")
        if not self.rho_sd > 0:
            raise ValueError("rho_sd must be positive")

    @property
    def n_iter(self):
        return self.n_burnin + self.n_samples * self.thin


class RhoAdapter:
    """Robbins-Monro tuning of the log proposal SD toward a target acceptance rate."""

    def __init__(self, sd=0.1, target=0.44, min_sd=1e-3, max_sd=2.0, active=True):
        self.log_sd = math.log(sd)
        self.target = target
        self.bounds = (math.log(min_sd), math.log(max_sd))
        self.active = active
        self.t = 0
        self.n_accept = 0
        self.n_prop = 0

    @property
    def sd(self):
        return math.exp(self.log_sd)

    def record(self, accept_prob, accepted):
        self.n_prop += 1
        self.n_accept += int(accepted)
        if not self.active:
            return
        self.t += 1
        self.log_sd += (accept_prob - self.target) / self.t**0.6
        self.log_sd = min(max(self.log_sd, self.bounds[0]), self.bounds[1])

    def freeze(self):
        self.active = False


# ---------------------------------------------------------------- allocations

def allocation_log_probabilities(state, data):
    """Unnormalized ``log w_ih + log k(y_ij | tau_h)``, shape ``(n, H)``."""
    logw = np.log(state.weights())
    return component_log_density(state, data.y, data.x) + logw[data.area]


def allocation_probabilities(state, data):
    with np.errstate(over="ignore"):
        lp = allocation_log_probabilities(state, data)
    top = lp.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        bad = int(np.flatnonzero(~np.isfinite(top.ravel()))[0])
        raise NumericalError(f"all kernel densities underflow for observation {bad}")
    p = np.exp(lp - top)
    return p / p.sum(axis=1, keepdims=True)


def update_allocations(state, data, rng):
    p = allocation_probabilities(state, data)
    u = rng.random(data.n_obs)
    cum = np.cumsum(p, axis=1)
    s = (u[:, None] * cum[:, -1:] > cum).sum(axis=1)
    state.alloc = np.minimum(s, state.H - 1).astype(np.int64)
    return state.alloc


def area_component_counts(state, data):
    """``N_ih``: observations of area ``i`` allocated to component ``h``."""
    H = state.H
    return np.bincount(data.area * H + state.alloc, minlength=data.n_areas * H).reshape(-1, H)


# ---------------------------------------------------------------------- atoms

def nig_posterior_params(n, ybar, ss, mu0, lam, a, b):
    """Normal-inverse-gamma update from ``n`` points with mean ``ybar`` and
    centred sum of squares ``ss``. Works elementwise on arrays."""
    n = np.asarray(n, dtype=float)
    lam_n = lam + n
    mu_n = (lam * mu0 + n * ybar) / lam_n
    a_n = a + 0.5 * n
    b_n = b + 0.5 * ss + lam * n * (ybar - mu0) ** 2 / (2.0 * lam_n)
    return mu_n, lam_n, a_n, b_n


def _draw_nig(mu_n, lam_n, a_n, b_n, rng):
    sigma2 = b_n / rng.standard_gamma(a_n)
    mu = mu_n + np.sqrt(sigma2 / lam_n) * rng.standard_normal(np.shape(mu_n))
    return mu, sigma2


def atom_sufficient_stats(resid, alloc, H):
    n = np.bincount(alloc, minlength=H).astype(float)
    tot = np.bincount(alloc, weights=resid, minlength=H)
    ybar = np.divide(tot, n, out=np.zeros(H), where=n > 0)
    ss = np.bincount(alloc, weights=(resid - ybar[alloc]) ** 2, minlength=H)
    return n, ybar, ss


def update_atoms(state, data, prior, rng):
    """Conjugate draw of ``(mu_h, sigma2_h)``; empty components draw from the base measure."""
    resid = data.y if state.beta is None else data.y - data.x @ state.beta
    n, ybar, ss = atom_sufficient_stats(resid, state.alloc, state.H)
    params = nig_posterior_params(n, ybar, ss, prior.mu0, prior.lam, prior.a, prior.b)
    state.mu, state.sigma2 = _draw_nig(*params, rng)


def regression_posterior(Z, y, coef_scale, a0, b0):
    """Conjugate regression with ``coef | s2 ~ N(0, coef_scale * s2 * I)``, ``s2 ~ IG(a0, b0)``.

    Returns ``(mean, delta, a_post, b_post)`` where ``delta`` is the posterior
    precision of the coefficients in units of ``1 / s2``.
    """
    p = Z.shape[1]
    delta = Z.T @ Z + np.eye(p) / coef_scale
    mean = np.linalg.solve(delta, Z.T @ y)
    a_post = a0 + 0.5 * y.size
    b_post = b0 + 0.5 * (y @ y - mean @ delta @ mean)
    return mean, delta, a_post, b_post


def update_component_regression(state, data, prior, rng):
    """M2: per component draw of ``sigma2_h`` then ``(mu_h, beta_h)``."""
    H, d = state.H, data.n_covariates
    Z_all = np.hstack([np.ones((data.n_obs, 1)), data.x])
    for h in range(H):
        idx = state.alloc == h
        mean, delta, a_p, b_p = regression_posterior(
            Z_all[idx], data.y[idx], prior.m2_coef_scale, prior.m2_a, prior.m2_b)
        s2 = b_p / rng.standard_gamma(a_p)
        L = np.linalg.cholesky(delta)
        coef = mean + math.sqrt(s2) * sla.solve_triangular(L.T, rng.standard_normal(d + 1), lower=False)
        state.sigma2[h] = s2
        state.mu[h] = coef[0]
        state.beta_h[h] = coef[1:]


# ----------------------------------------------------------------------- beta

def beta_posterior(state, data, prior):
    """M1: mean and covariance of the Gaussian full conditional of ``beta``."""
    x = data.x
    prec_w = 1.0 / state.sigma2[state.alloc]
    resid = data.y - state.mu[state.alloc]
    prec = np.eye(x.shape[1]) / prior.sigma2_beta + (x * prec_w[:, None]).T @ x
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    return cov @ (x.T @ (prec_w * resid)), cov


def update_beta(state, data, prior, rng):
    mean, cov = beta_posterior(state, data, prior)
    state.beta = mean + np.linalg.cholesky(cov) @ rng.standard_normal(mean.size)


# ---------------------------------------------------------------------- Sigma

def _residuals(state, graph):
    return state.w_tilde - state.m_tilde[graph.components.labels]


def sigma_posterior_params(state, graph, prior):
    """Degrees of freedom and scale of the inverse-Wishart full conditional."""
    R = _residuals(state, graph)
    P = car_precision(graph, state.rho)
    Vp = prior.V + R.T @ P @ R
    return prior.nu + graph.n_areas, 0.5 * (Vp + Vp.T)


def update_sigma(state, graph, prior, rng):
    df, Vp = sigma_posterior_params(state, graph, prior)
    state.sigma = sample_inverse_wishart(df, Vp, rng)


# ------------------------------------------------------------------------ rho

def rho_log_target(rho, state, graph, prior):
    """Log full conditional of ``rho`` up to a constant."""
    K = state.H - 1
    R = _residuals(state, graph)
    lam = np.linalg.inv(state.sigma)
    logdet = 0.0
    P = car_precision(graph, rho)
    for idx, L in block_cholesky(graph, rho):
        logdet += 2.0 * np.log(np.diag(L)).sum()
    quad = np.sum((P @ R) * (R @ lam))
    out = 0.5 * K * logdet - 0.5 * quad
    out += (prior.rho_a - 1.0) * math.log(rho) + (prior.rho_b - 1.0) * math.log1p(-rho)
    return out


def rho_log_acceptance(rho, rho_new, sd, state, graph, prior):
    """Log MH ratio, including the truncated-proposal normalizers."""
    return (
        rho_log_target(rho_new, state, graph, prior)
        - rho_log_target(rho, state, graph, prior)
        + truncnorm_unit_log_mass(rho, sd)
        - truncnorm_unit_log_mass(rho_new, sd)
    )


def update_rho(state, graph, prior, rng, adapter):
    sd = adapter.sd
    prop = truncnorm_unit_interval(state.rho, sd, rng)
    log_r = rho_log_acceptance(state.rho, prop, sd, state, graph, prior)
    accept_prob = 1.0 if log_r >= 0 else math.exp(log_r)
    accepted = rng.random() < accept_prob
    if accepted:
        state.rho = prop
    adapter.record(accept_prob, accepted)
    return state.rho, accepted


# -------------------------------------------------------------------- weights

@njit(cache=True)
def conditional_prior(i, h, wt, m_area, lam, rho, fdiag, indptr, indices):
    """Mean and variance of ``w_tilde[i, h]`` given every other coordinate under the MCAR prior."""
    K = wt.shape[1]
    acc = 0.0
    for l in range(K):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            s += wt[j, l] - m_area[j, l]
        acc += rho * lam[h, l] * s
        if l != h:
            acc -= fdiag[i] * lam[h, l] * (wt[i, l] - m_area[i, l])
    prec = fdiag[i] * lam[h, h]
    return m_area[i, h] + acc / prec, 1.0 / prec


@njit(cache=True)
def pg_posterior(mu_s, var_s, n_i, n_ih, omega, c):
    """Gaussian full conditional of one transformed weight given its PG latent."""
    var = 1.0 / (1.0 / var_s + omega)
    mean = var * (mu_s / var_s + n_ih - 0.5 * n_i + omega * c)
    return mean, var


@njit(cache=True)
def log_partner_sum(wt, i, h):
    """``log(1 + sum_{k != h} exp(wt[i, k]))``: the reference part contributes the 1."""
    K = wt.shape[1]
    top = 0.0
    for k in range(K):
        if k != h and wt[i, k] > top:
            top = wt[i, k]
    s = math.exp(-top)
    for k in range(K):
        if k != h:
            s += math.exp(wt[i, k] - top)
    return top + math.log(s)


@njit(cache=True)
def _weights_sweep(wt, m_area, lam, rho, fdiag, indptr, indices, n_i, n_ih, rng, exact_max_b, omega):
    I, K = wt.shape
    for i in range(I):
        for h in range(K):
            c = log_partner_sum(wt, i, h)
            om = pg_draw(n_i[i], wt[i, h] - c, rng, exact_max_b)
            omega[i, h] = om
            mu_s, var_s = conditional_prior(i, h, wt, m_area, lam, rho, fdiag, indptr, indices)
            mean, var = pg_posterior(mu_s, var_s, n_i[i], n_ih[i, h], om, c)
            wt[i, h] = mean + math.sqrt(var) * rng.standard_normal()


def update_weights(state, data, graph, rng, counts=None, exact_max_b=EXACT_MAX_B):
    """PG-augmented update of every ``w_tilde[i, h]``; returns the latent ``omega``."""
    if counts is None:
        counts = area_component_counts(state, data)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    n_i = counts.sum(axis=1)
    lam = np.ascontiguousarray(np.linalg.inv(state.sigma))
    m_area = np.ascontiguousarray(state.m_tilde[graph.components.labels])
    fdiag = state.rho * graph.degrees + 1.0 - state.rho
    indptr, indices = graph.csr
    wt = np.ascontiguousarray(state.w_tilde, dtype=float)
    omega = np.zeros_like(wt)
    _weights_sweep(wt, m_area, lam, state.rho, fdiag, indptr, indices, n_i, counts, rng,
                   exact_max_b, omega)
    state.w_tilde = wt
    return omega


# ---------------------------------------------------------------------- m_tilde

def m_posterior(state, graph, eta2):
    """``(mean, cov)`` of ``m_tilde`` for each connected component."""
    K = state.H - 1
    lam = np.linalg.inv(state.sigma)
    P = car_precision(graph, state.rho)
    out = []
    for idx in graph.components.blocks():
        Pc = P[np.ix_(idx, idx)]
        one = np.ones(len(idx))
        prec = (one @ Pc @ one) * lam
        if eta2 is not None and np.isfinite(eta2):
            prec = prec + np.eye(K) / eta2
        cov = np.linalg.inv(prec)
        cov = 0.5 * (cov + cov.T)
        mean = cov @ lam @ (state.w_tilde[idx].T @ (Pc @ one))
        out.append((mean, cov))
    return out


def update_m(state, graph, prior, rng):
    K = state.H - 1
    for c, (mean, cov) in enumerate(m_posterior(state, graph, prior.eta2)):
        state.m_tilde[c] = mean + cholesky_spd(cov, "m_tilde covariance") @ rng.standard_normal(K)


# ----------------------------------------------------------------------- driver

def initial_state(prior, data, rng):
    """Neutral start: uniform allocations, atoms from the base measure, uniform weights."""
    H, I, d = prior.H, data.n_areas, data.n_covariates
    K = H - 1
    k = data.graph.components.n_components
    if prior.variant in ("m1", "m2") and d == 0:
        raise DataError(f"variant {prior.variant!r} needs covariates")
    alloc = rng.integers(0, H, size=data.n_obs).astype(np.int64)
    if prior.variant == "m2":
        sigma2 = prior.m2_b / rng.standard_gamma(prior.m2_a, size=H)
        coef = np.sqrt(prior.m2_coef_scale * sigma2)[:, None] * rng.standard_normal((H, d + 1))
        mu, beta_h = coef[:, 0].copy(), coef[:, 1:].copy()
    else:
        mu, sigma2 = _draw_nig(np.full(H, prior.mu0), np.full(H, prior.lam),
                               np.full(H, prior.a), np.full(H, prior.b), rng)
        beta_h = None
    sigma = prior.V / (prior.nu - H) if prior.nu > H else np.eye(K)
    return MixtureState(
        mu=np.asarray(mu, float), sigma2=np.asarray(sigma2, float),
        w_tilde=np.zeros((I, K)), alloc=alloc, sigma=np.array(sigma, float), rho=0.5,
        m_tilde=np.zeros((k, K)),
        beta=np.zeros(d) if prior.variant == "m1" else None, beta_h=beta_h,
    )


_UPDATES = ("allocations", "atoms", "beta", "sigma", "rho", "weights", "m_tilde")


def _apply_update(name, state, data, prior, rng, adapter):
    graph = data.graph
    if name == "allocations":
        update_allocations(state, data, rng)
    elif name == "atoms":
        if prior.variant == "m2":
            update_component_regression(state, data, prior, rng)
        else:
            update_atoms(state, data, prior, rng)
    elif name == "beta":
        if prior.variant == "m1":
            update_beta(state, data, prior, rng)
    elif state.H == 1:
        return
    elif name == "sigma":
        update_sigma(state, graph, prior, rng)
    elif name == "rho":
        update_rho(state, graph, prior, rng, adapter)
    elif name == "weights":
        update_weights(state, data, graph, rng)
    elif name == "m_tilde":
        update_m(state, graph, prior, rng)


def gibbs_sweep(state, data, prior, rng, adapter, skip=()):
    """One full scan in the fixed order. ``skip`` names blocks to hold fixed."""
    for name in _UPDATES:
        if name in skip:
            continue
        try:
            _apply_update(name, state, data, prior, rng, adapter)
        except Exception as exc:
            raise SamplerError(f"{name} update failed: {exc}", update=name) from exc
    return state


def run_chain(config, data, rng=None, state=None, progress=None):
    """Run the sampler and return the stored states as a :class:`Chain`.

    States are stored after sweeps ``n_burnin + thin``, ``n_burnin + 2 thin``, ...
    (sweeps counted from 1). The generator defaults to ``default_rng(config.seed)``.
    """
    prior = config.prior
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if prior.variant != "plain" and data.n_covariates == 0:
        raise DataError(f"variant {prior.variant!r} needs covariates")
    if state is None:
        state = initial_state(prior, data, rng)
    adapter = RhoAdapter(config.rho_sd, config.target_accept, active=config.adapt)
    S, n = config.n_samples, data.n_obs
    stored, logliks, iters = [], np.empty((S, n)), np.empty(S, dtype=np.int64)
    t0 = time.perf_counter()
    s = 0
    for it in range(1, config.n_iter + 1):
        if it == config.n_burnin + 1:
            adapter.freeze()
        try:
            gibbs_sweep(state, data, prior, rng, adapter)
        except SamplerError as exc:
            raise SamplerError(f"iteration {it}: {exc}", iteration=it, update=exc.update) from exc
        if it > config.n_burnin and (it - config.n_burnin) % config.thin == 0:
            stored.append(state.copy())
            logliks[s] = log_likelihood_matrix(state, data)
            iters[s] = it
            s += 1
        if progress is not None:
            progress(it)
    counts = data.counts
    info = {
        "rho_acceptance": adapter.n_accept / max(adapter.n_prop, 1),
        "rho_sd": adapter.sd,
        "pg_approximation": bool(np.any(counts > EXACT_MAX_B)),
        "wall_time": time.perf_counter() - t0,
        "seed": config.seed,
    }
    return Chain.from_states(stored, logliks, iters, info)


# ------------------------------------------------------------- joint simulation

def sample_prior_state(prior, data, rng):
    """Draw every unknown from the prior (plain variant); allocations follow the weights."""
    from .logistic_mcar import LogisticMcarParams, sample_prior_alr

    graph = data.graph
    H, K = prior.H, prior.H - 1
    k = graph.components.n_components
    mu, sigma2 = _draw_nig(np.full(H, prior.mu0), np.full(H, prior.lam),
                           np.full(H, prior.a), np.full(H, prior.b), rng)
    sigma = sample_inverse_wishart(prior.nu, prior.V, rng)
    rho = float(rng.beta(prior.rho_a, prior.rho_b))
    m = math.sqrt(prior.eta2) * rng.standard_normal((k, K))
    wt = sample_prior_alr(LogisticMcarParams(m, rho, sigma, graph), 1, rng)[0]
    state = MixtureState(mu=mu, sigma2=sigma2, w_tilde=wt, alloc=np.zeros(data.n_obs, np.int64),
                         sigma=sigma, rho=rho, m_tilde=m)
    resample_allocations_from_weights(state, data, rng)
    return state


def resample_allocations_from_weights(state, data, rng):
    w = state.weights()[data.area]
    u = rng.random(data.n_obs)
    state.alloc = np.minimum((u[:, None] > np.cumsum(w, axis=1)).sum(axis=1), state.H - 1)
    return state.alloc


def simulate_responses(state, data, rng):
    """New responses ``y_ij ~ N(mu_{s_ij}, sigma2_{s_ij})`` with the areas and allocations kept."""
    s = state.alloc
    y = state.mu[s] + np.sqrt(state.sigma2[s]) * rng.standard_normal(s.size)
    return type(data)(y, data.area, data.graph, data.x)
