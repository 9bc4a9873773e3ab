import json
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from spmix.data_io import (
    Cauchy,
    ChiSquared,
    SkewNormal,
    StudentT,
    generate_grid_dataset,
    generate_scenario,
    grid_alr_weights,
    read_chain,
    read_dataset,
    read_density_csv,
    read_loglik,
    read_truth_csv,
    stratified_cv_split,
    write_chain,
    write_dataset,
    write_density_csv,
    write_truth_csv,
)
from spmix.errors import DataError, DomainError
from spmix.graph import ProximityGraph, write_adjacency
from spmix.gibbs import ChainConfig, run_chain
from spmix.mcutils import batch_means_se
from spmix.model import Dataset, DensityEstimate, PriorConfig
from spmix.simplex import alr_inv


def test_scenario_sizes_and_graph():
    for name, sizes in [("I", [1000] * 6), ("II", [1000, 10] * 3), ("III", [100] * 6)]:
        sc = generate_scenario(name, 0)
        np.testing.assert_array_equal(sc.data.counts, sizes)
        assert sc.data.graph.components.n_components == 3
        assert sc.grid.size == 2000
    with pytest.raises(DomainError):
        generate_scenario("IV", 0)


def test_scenario_deterministic():
    a, b = generate_scenario("II", 7), generate_scenario("II", 7)
    np.testing.assert_array_equal(a.data.y, b.data.y)
    assert not np.array_equal(a.data.y, generate_scenario("II", 8).data.y)


def test_student_t_location(rng):
    y = StudentT(6, -4.0, 1.0).sample(100_000, rng)
    assert abs(y.mean() + 4) < 3 * batch_means_se(y)
    assert stats.kstest(y, stats.t(6, -4, 1).cdf).pvalue > 1e-3


def test_skew_normal_mean_and_law(rng):
    sn = SkewNormal(4.0, 4.0, 1.0)
    assert sn.mean() == pytest.approx(4 + 4 * (1 / np.sqrt(2)) * np.sqrt(2 / np.pi), rel=1e-14)
    y = sn.sample(100_000, rng)
    assert abs(y.mean() - sn.mean()) < 3 * batch_means_se(y)
    assert stats.kstest(y, stats.skewnorm(1.0, 4.0, 4.0).cdf).pvalue > 1e-3


def test_chi2_and_cauchy_laws(rng):
    assert stats.kstest(ChiSquared(3).sample(50_000, rng), stats.chi2(3).cdf).pvalue > 1e-3
    assert stats.kstest(Cauchy(0, 1).sample(50_000, rng), stats.cauchy().cdf).pvalue > 1e-3


@pytest.mark.parametrize("name", ["I", "III", "grid16"])
def test_truths_integrate_to_one(name):
    sc = generate_scenario(name, 0)
    grid = np.linspace(-3000, 3000, 2_000_001)
    for t in sc.truths:
        mass = integrate.trapezoid(t.pdf(grid), grid)
        # the Cauchy tail beyond +-3000 carries about 2e-4
        assert mass == pytest.approx(1.0, abs=1e-3)


def test_grid_weights():
    w = grid_alr_weights(8)
    np.testing.assert_allclose(w[0], [-2.625, 2.625], rtol=1e-14)
    np.testing.assert_allclose(alr_inv(w[0]), [0.004869, 0.927913, 0.067218], atol=5e-7)
    w3 = alr_inv(grid_alr_weights(3))
    np.testing.assert_allclose(w3[4], [1 / 3] * 3, rtol=1e-14)


def test_grid_dataset():
    sc = generate_grid_dataset(4, 0)
    assert sc.data.n_areas == 16 and np.all(sc.data.counts == 25)
    deg = sc.data.graph.degrees
    assert deg[0] == 2 and deg[5] == 4 and deg.max() == 4
    assert generate_scenario("grid64", 0).data.n_areas == 64


def test_dataset_round_trip(tmp_path, rng):
    g = ProximityGraph.from_edge_list(3, [(0, 1), (1, 2)])
    d = Dataset(rng.normal(size=12), np.arange(12) % 3, g, rng.normal(size=(12, 2)))
    write_dataset(d, tmp_path / "obs.csv")
    write_adjacency(g, tmp_path / "adj.txt")
    back = read_dataset(tmp_path / "obs.csv", tmp_path / "adj.txt", standardize=False)
    np.testing.assert_allclose(back.y, d.y, rtol=1e-12)
    np.testing.assert_allclose(back.x, d.x, rtol=1e-12)
    np.testing.assert_array_equal(back.area, d.area)
    std = read_dataset(tmp_path / "obs.csv", graph=g, center=True)
    np.testing.assert_allclose(std.x.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(std.x.std(axis=0), 1, rtol=1e-12)
    assert abs(std.y.mean()) < 1e-12


def test_read_dataset_small_and_errors(tmp_path):
    g = ProximityGraph.empty(1)
    (tmp_path / "a.csv").write_text("area,y\n0,1.5\n0,2.5\n")
    assert read_dataset(tmp_path / "a.csv", graph=g).counts.tolist() == [2]
    (tmp_path / "b.csv").write_text("area,y,age\n0,1.5,3\n0,2.5,3\n")
    with pytest.raises(DataError, match="age"):
        read_dataset(tmp_path / "b.csv", graph=g)
    (tmp_path / "c.csv").write_text("y,area\n1,0\n")
    with pytest.raises(DataError):
        read_dataset(tmp_path / "c.csv", graph=g)
    (tmp_path / "d.csv").write_text("area,y\n0,1\n2,1\n")
    with pytest.raises(DataError):
        read_dataset(tmp_path / "d.csv", graph=ProximityGraph.empty(2))
    (tmp_path / "e.csv").write_text("area,y\n0,1\n1,1\n")
    with pytest.raises(DataError):
        read_dataset(tmp_path / "e.csv", graph=ProximityGraph.empty(3))


def test_cv_split(rng):
    g = ProximityGraph.empty(1)
    d = Dataset(np.arange(4.0), np.zeros(4, np.int64), g)
    sets = stratified_cv_split(d, 2, 0)
    assert [t.size for _, t in sets] == [2, 2]
    sc = generate_scenario("II", 0)
    folds = stratified_cv_split(sc.data, 5, 3)
    tests = np.concatenate([t for _, t in folds])
    assert np.array_equal(np.sort(tests), np.arange(sc.data.n_obs))
    for train, test in folds:
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == sc.data.n_obs
        for i in range(6):
            n_i = sc.data.counts[i]
            assert abs(np.sum(sc.data.area[test] == i) - n_i / 5) <= 1
    with pytest.raises(DomainError):
        stratified_cv_split(d, 1, 0)
    with pytest.warns(UserWarning):
        stratified_cv_split(d, 5, 0)
    a = stratified_cv_split(sc.data, 5, 3)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, folds))


def test_density_and_truth_csv(tmp_path):
    sc = generate_scenario("grid16", 1)
    write_truth_csv(sc, tmp_path / "truth.csv")
    grid, tab = read_truth_csv(tmp_path / "truth.csv")
    np.testing.assert_array_equal(grid, sc.grid)
    np.testing.assert_array_equal(tab, sc.true_density_table())
    est = DensityEstimate(sc.grid, tab[0], tab[0] * 0.9, tab[0] * 1.1)
    write_density_csv(est, tmp_path / "d.csv")
    g, m = read_density_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(m, tab[0])


@pytest.mark.parametrize("variant", ["plain", "m2"])
def test_chain_round_trip(tmp_path, rng, variant):
    g = ProximityGraph.from_edge_list(2, [(0, 1)])
    x = None if variant == "plain" else rng.normal(size=(20, 2))
    d = Dataset(rng.normal(size=20), np.arange(20) % 2, g, x)
    chain = run_chain(ChainConfig(n_burnin=5, n_samples=4, thin=1, prior=PriorConfig(H=3, variant=variant)), d)
    write_chain(chain, tmp_path / "c", {"seed": 0})
    back = read_chain(tmp_path / "c")
    for name in chain.STATE_FIELDS + ("loglik", "iterations"):
        a, b = getattr(chain, name), getattr(back, name)
        if a is None:
            assert b is None
        else:
            np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(read_loglik(tmp_path / "c"), chain.loglik)
    meta = json.loads((tmp_path / "c" / "metadata.json").read_text())
    assert meta["n_states"] == 4 and meta["seed"] == 0
    with open(tmp_path / "c" / "loglik.npy", "rb") as fh:
        assert fh.read(6) == b"\x93NUMPY"


def test_single_component_chain_round_trip(tmp_path, rng):
    g = ProximityGraph.empty(1)
    d = Dataset(rng.normal(size=5), np.zeros(5, np.int64), g)
    chain = run_chain(ChainConfig(n_burnin=2, n_samples=2, thin=1, prior=PriorConfig(H=1)), d)
    write_chain(chain, tmp_path)
    back = read_chain(tmp_path)
    assert back.w_tilde.shape == chain.w_tilde.shape
    assert back.sigma.shape == chain.sigma.shape


def test_read_loglik_csv_and_missing(tmp_path):
    np.savetxt(tmp_path / "ll.csv", np.ones((3, 2)), delimiter=",")
    assert read_loglik(tmp_path / "ll.csv").shape == (3, 2)
    with pytest.raises(DataError):
        read_loglik(tmp_path / "nope.npy")
    with pytest.raises(DataError):
        read_chain(tmp_path)
