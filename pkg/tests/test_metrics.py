import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from spmix.errors import DimensionError, DomainError
from spmix.metrics import GridDensity, hellinger_grid, kl_divergence_grid, log_cpo, lpml, pmse, waic

GRID = np.linspace(-10, 10, 2000)


def gauss(m, s=1.0):
    return GridDensity(GRID, norm.pdf(GRID, m, s))


def mixture(rng):
    k = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    m, s = rng.normal(0, 2, k), rng.uniform(0.5, 2, k)
    return GridDensity(GRID, (w * norm.pdf(GRID[:, None], m, s)).sum(axis=1))


def test_kl_examples():
    p = gauss(0)
    assert kl_divergence_grid(p, p) == pytest.approx(0, abs=1e-15)
    assert kl_divergence_grid(p, gauss(1)) == pytest.approx(0.5, abs=1e-3)
    assert kl_divergence_grid((GRID, p.values), (GRID, gauss(1).values)) == pytest.approx(0.5, abs=1e-3)


def test_kl_zero_support_and_floor():
    p = np.where(np.abs(GRID) < 1, 0.5, 0.0)
    q = np.zeros_like(GRID)
    q[np.abs(GRID) < 1] = 0.5
    assert kl_divergence_grid((GRID, p), (GRID, q)) == pytest.approx(0.0, abs=1e-12)
    q2 = np.where(GRID > 0, 1.0, 0.0)
    assert np.isfinite(kl_divergence_grid((GRID, p), (GRID, q2)))


def test_hellinger_examples():
    p, q = gauss(0), gauss(1)
    assert hellinger_grid(p, p) == pytest.approx(0, abs=1e-7)
    assert hellinger_grid(p, q) == pytest.approx(np.sqrt(1 - np.exp(-1 / 8)), abs=1e-3)
    assert hellinger_grid(p, q) == pytest.approx(hellinger_grid(q, p), abs=1e-12)
    far = GridDensity(GRID, norm.pdf(GRID, 9.5, 0.1))
    assert 0.999 < hellinger_grid(gauss(-9.5, 0.1), far) <= 1.0


def test_grid_errors():
    with pytest.raises(DimensionError):
        kl_divergence_grid(gauss(0), GridDensity(GRID[:-1], gauss(0).values[:-1]))
    with pytest.raises(DimensionError):
        hellinger_grid(gauss(0), GridDensity(GRID + 1e-3, gauss(0).values))
    with pytest.raises(DomainError):
        GridDensity(GRID[::-1], gauss(0).values)
    with pytest.raises(DomainError):
        GridDensity(GRID, -gauss(0).values)


def test_grid_density_mass():
    assert gauss(0).mass() == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prop_divergences(seed):
    r = np.random.default_rng(seed)
    p, q = mixture(r), mixture(r)
    assert kl_divergence_grid(p, q) >= 0
    h = hellinger_grid(p, q)
    assert 0 <= h <= 1
    assert h == pytest.approx(hellinger_grid(q, p), abs=1e-12)
    assert kl_divergence_grid(p, p) < 1e-6 and hellinger_grid(p, p) < 1e-6


def naive_lpml(ll):
    like = np.exp(ll)
    cpo = 1.0 / np.mean(1.0 / like, axis=0)
    return np.sum(np.log(cpo))


def naive_waic(ll):
    S, n = ll.shape
    total = 0.0
    for j in range(n):
        col = ll[:, j]
        lppd = np.log(np.mean(np.exp(col)))
        pen = np.sum((col - col.mean()) ** 2) / (S - 1)
        total += lppd - pen
    return -2 * total


def test_lpml_examples(rng):
    ll = rng.normal(size=(1, 6))
    assert lpml(ll) == pytest.approx(ll.sum(), abs=1e-12)
    assert log_cpo(np.full((7, 1), -2.5))[0] == pytest.approx(-2.5, abs=1e-12)
    ll = rng.normal(-1, 1, size=(5, 4))
    assert lpml(ll) == pytest.approx(naive_lpml(ll), abs=1e-10)


def test_lpml_extreme_values():
    ll = np.full((10, 3), -5000.0)
    assert lpml(ll) == pytest.approx(-15000.0, rel=1e-12)


def test_waic_examples(rng):
    c = rng.normal(size=4)
    assert waic(np.tile(c, (6, 1))) == pytest.approx(-2 * c.sum(), abs=1e-12)
    ll = rng.normal(-1, 1, size=(10, 3))
    assert waic(ll) == pytest.approx(naive_waic(ll), abs=1e-10)
    assert waic(ll + 0.7) == pytest.approx(waic(ll) - 2 * 3 * 0.7, abs=1e-10)


def test_criteria_errors():
    with pytest.raises(DomainError):
        waic(np.zeros((1, 3)))
    with pytest.raises(DomainError):
        lpml(np.array([[0.0, np.inf]]))
    with pytest.raises(DimensionError):
        lpml(np.zeros(3))


def test_pmse(rng):
    assert pmse([1, 2, 3], [1, 2, 3]) == 0
    assert pmse([0, 0], [1, 1]) == 1
    a, b = rng.normal(size=20), rng.normal(size=20)
    assert pmse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 20, rel=1e-12)
    with pytest.raises(DimensionError):
        pmse([1, 2], [1])
    with pytest.raises(DomainError):
        pmse([], [])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prop_row_permutation_invariance(seed):
    r = np.random.default_rng(seed)
    ll = r.normal(-2, 1, size=(8, 5))
    perm = r.permutation(8)
    assert lpml(ll[perm]) == pytest.approx(lpml(ll), abs=1e-10)
    assert waic(ll[perm]) == pytest.approx(waic(ll), abs=1e-10)
