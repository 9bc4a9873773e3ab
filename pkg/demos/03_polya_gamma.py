"""Polya-Gamma draws.

PG(b, c) variables make logistic-type likelihoods conditionally Gaussian.
Integer b uses b exact PG(1, c) draws (Devroye's alternating series);
above b = 170 a moment-matched Gaussian takes over.
"""

import numpy as np

from spmix.polya_gamma import pg_mean, pg_variance, sample_pg, uses_approximation

rng = np.random.default_rng(2)

for b, c in [(1, 0.0), (1, 2.5), (10, -1.0), (300, 0.5)]:
    x = sample_pg(b, c, rng, size=20_000)
    print(f"PG({b}, {c}): mean {x.mean():.4f} (exact {pg_mean(b, c):.4f}), "
          f"var {x.var():.5f} (exact {pg_variance(b, c):.5f}), "
          f"gaussian={uses_approximation(b)}")
