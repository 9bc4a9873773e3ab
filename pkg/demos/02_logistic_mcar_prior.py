"""The logisticMCAR prior on area-level mixture weights.

Each area gets a composition w_i; stacked alr coordinates follow a
multivariate CAR with precision (F - rho G) kron Sigma^{-1}. Neighbouring
areas get similar weights, and areas in different connected components
are independent.
"""

import numpy as np

from spmix.logistic_mcar import (
    active_components,
    conditional_mean_logratio,
    distance_study_params,
    marginal_logratio_cov,
    pairwise_distance_study,
    sample_prior,
    sample_sparse_prior,
)
from spmix.graph import ProximityGraph

rng = np.random.default_rng(1)

# five areas: a triangle {0, 1, 2} and a pair {3, 4}; H = 3, Sigma_12 = 0.5
params = distance_study_params()
print("components:", params.graph.components.labels)
w = sample_prior(params, 5, rng)
print("one draw of the five compositions:\n", np.round(w[0], 3))

# neighbours are closer than areas in different components
study = pairwise_distance_study(params, 10_000, rng)
for key in ("d_12", "d_15", "d_gamma"):
    s = study[key]
    print(f"{key}: quartiles {s['q25']:.3f} / {s['median']:.3f} / {s['q75']:.3f}")

# closed-form log-ratio covariance; zero across components
print("cov(log w_01/w_02, log w_21/w_22) =", marginal_logratio_cov(0, 2, 0, 1, params))
print("cov across components          =", marginal_logratio_cov(0, 3, 0, 1, params))

# conditional mean of a log-ratio given the neighbours
print("E[log w_00/w_02 | rest] =", conditional_mean_logratio(0, 0, 2, w[0], params))

# a random prior mean m_tilde ~ N(0, eta2 I) makes draws sparse
g = ProximityGraph.empty(1)
for eta2 in (1.0, 9.0, 25.0):
    ws = sample_sparse_prior(g, 30, eta2, 0.0, np.eye(29), 5000, rng)
    print(f"eta2 = {eta2:4.0f}: mean active components (w > 0.01) =",
          active_components(ws, 0.01).mean().round(2))
