"""Simulated scenarios, observation files, CV splits and chain persistence."""

import csv
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DataError, DomainError
from .graph import ProximityGraph, read_adjacency, write_adjacency
from .model import Chain, Dataset
from .simplex import alr_inv

SCENARIOS = ("I", "II", "III", "grid16", "grid64", "grid256")

_SIX_AREA_EDGES = [(0, 1), (2, 3), (4, 5)]
_SCENARIO_SIZES = {
    "I": (1000,) * 6,
    "II": (1000, 10, 1000, 10, 1000, 10),
    "III": (100,) * 6,
}


# ------------------------------------------------------------- distributions

@dataclass(frozen=True)
class StudentT:
    df: float
    loc: float = 0.0
    scale: float = 1.0

    def sample(self, n, rng):
        z = rng.standard_normal(n)
        v = rng.chisquare(self.df, n)
        return self.loc + self.scale * z / np.sqrt(v / self.df)

    def pdf(self, y):
        return stats.t.pdf(y, self.df, self.loc, self.scale)


@dataclass(frozen=True)
class SkewNormal:
    xi: float
    omega: float
    alpha: float

    @property
    def delta(self):
        return self.alpha / math.sqrt(1.0 + self.alpha**2)

    def mean(self):
        return self.xi + self.omega * self.delta * math.sqrt(2.0 / math.pi)

    def sample(self, n, rng):
        u0 = np.abs(rng.standard_normal(n))
        u1 = rng.standard_normal(n)
        d = self.delta
        return self.xi + self.omega * (d * u0 + math.sqrt(1.0 - d * d) * u1)

    def pdf(self, y):
        t = (np.asarray(y, float) - self.xi) / self.omega
        return 2.0 / self.omega * stats.norm.pdf(t) * stats.norm.cdf(self.alpha * t)


@dataclass(frozen=True)
class ChiSquared:
    k: float

    def sample(self, n, rng):
        return 2.0 * rng.standard_gamma(self.k / 2.0, n)

    def pdf(self, y):
        return stats.chi2.pdf(y, self.k)


@dataclass(frozen=True)
class Cauchy:
    loc: float = 0.0
    scale: float = 1.0

    def sample(self, n, rng):
        return self.loc + self.scale * rng.standard_normal(n) / np.abs(rng.standard_normal(n))

    def pdf(self, y):
        return stats.cauchy.pdf(y, self.loc, self.scale)


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def sample(self, n, rng):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.means[comp] + self.sds[comp] * rng.standard_normal(n)

    def pdf(self, y):
        y = np.asarray(y, float)[..., None]
        return (self.weights * stats.norm.pdf(y, self.means, self.sds)).sum(axis=-1)


# ------------------------------------------------------------------ scenarios

@dataclass(frozen=True, eq=False)
class Scenario:
    """A simulated dataset with the densities that generated it."""

    name: str
    data: Dataset
    truths: tuple
    grid: np.ndarray

    def true_density(self, area, y):
        return self.truths[area].pdf(y)

    def true_density_table(self):
        """``(I, G)`` array of true densities on :attr:`grid`."""
        return np.stack([t.pdf(self.grid) for t in self.truths])


def six_area_graph():
    return ProximityGraph.from_edge_list(6, _SIX_AREA_EDGES)


def scenario_densities(name):
    t = StudentT(6, -4.0, 1.0)
    sn = SkewNormal(4.0, 4.0, 1.0)
    tail = Cauchy(0.0, 1.0) if name == "III" else ChiSquared(3)
    return (t, t, sn, sn, tail, tail)


def evaluation_grid(name):
    """Fixed grid on which estimated and true densities are compared."""
    if name in ("I", "II"):
        return np.linspace(-20.0, 30.0, 2000)
    if name == "III":
        return np.linspace(-50.0, 50.0, 2000)
    return np.linspace(-10.0, 10.0, 2000)


def generate_scenario(name, seed):
    """Simulate one of the six-area scenarios or a grid dataset.

    Parameters
    ----------
    name : {"I", "II", "III", "grid16", "grid64", "grid256"}
    seed : int

    Returns
    -------
    Scenario
    """
    if name not in SCENARIOS:
        raise DomainError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    if name.startswith("grid"):
        side = math.isqrt(int(name[4:]))
        return generate_grid_dataset(side, seed)
    rng = np.random.default_rng(seed)
    truths = scenario_densities(name)
    groups = [d.sample(n, rng) for d, n in zip(truths, _SCENARIO_SIZES[name])]
    data = Dataset.from_groups(groups, six_area_graph())
    return Scenario(name, data, truths, evaluation_grid(name))


def grid_alr_weights(side):
    """Transformed weights of the grid design, shape ``(side**2, 2)``.

    Cell centres sit at ``((c + 1/2)/side, (r + 1/2)/side)`` with areas
    numbered row-major from the bottom-left, matching ``ProximityGraph.rook_grid``.
    """
    k = np.arange(side * side)
    cx = (k % side + 0.5) / side
    cy = (k // side + 0.5) / side
    w1 = 3.0 * (cx - 0.5) + 3.0 * (cy - 0.5)
    return np.column_stack([w1, -w1])


GRID_MEANS = np.array([-5.0, 0.0, 5.0])


def generate_grid_dataset(side, seed, n_per_area=25):
    """Three-component Gaussian mixtures on a ``side x side`` rook lattice."""
    if side < 1:
        raise DomainError("side must be positive")
    rng = np.random.default_rng(seed)
    w = alr_inv(grid_alr_weights(side))
    truths = tuple(GaussianMixture(wi, GRID_MEANS, np.ones(3)) for wi in w)
    groups = [t.sample(n_per_area, rng) for t in truths]
    data = Dataset.from_groups(groups, ProximityGraph.rook_grid(side))
    return Scenario(f"grid{side * side}", data, truths, evaluation_grid("grid"))


# -------------------------------------------------------------- observations

def read_dataset(obs_path, adjacency_path=None, graph=None, center=False, standardize=True):
    """Read ``area,y[,x1..xd]`` observations plus an adjacency file.

    Covariates are standardized column-wise unless ``standardize=False``;
    the response is centred on its overall mean when ``center=True``.
    """
    if graph is None:
        if adjacency_path is None:
            raise DataError("an adjacency file or graph is required")
        graph = read_adjacency(adjacency_path)
    with open(obs_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{obs_path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "area" or header[1] != "y":
        raise DataError(f"{obs_path}: header must start with 'area,y'")
    body = [r for r in rows[1:] if r]
    if any(len(r) != len(header) for r in body):
        raise DataError(f"{obs_path}: ragged rows")
    try:
        vals = np.array(body, dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise DataError(f"{obs_path}: non-numeric entry") from exc
    area = vals[:, 0]
    if np.any(area != np.round(area)):
        raise DataError("area ids must be integers")
    area = area.astype(np.int64)
    present = np.unique(area)
    if present.size and not np.array_equal(present, np.arange(present.size)):
        raise DataError("area ids must be contiguous and start at 0")
    if present.size != graph.n_areas:
        raise DataError(f"data has {present.size} areas but the graph has {graph.n_areas}")
    y = vals[:, 1]
    if center:
        y = y - y.mean()
    x = None
    if len(header) > 2:
        x = vals[:, 2:]
        if standardize:
            x = standardize_columns(x, header[2:])
    return Dataset(y, area, graph, x)


def standardize_columns(x, names):
    sd = x.std(axis=0)
    for j, s in enumerate(sd):
        if not s > 0:
            raise DataError(f"covariate column {names[j]!r} is constant; cannot standardize")
    return (x - x.mean(axis=0)) / sd


def write_dataset(data, path, names=None):
    d = data.n_covariates
    names = names or [f"x{j + 1}" for j in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["area", "y", *names])
        for k in range(data.n_obs):
            row = [int(data.area[k]), repr(float(data.y[k]))]
            if d:
                row += [repr(float(v)) for v in data.x[k]]
            w.writerow(row)


def stratified_cv_split(data, folds, seed):
    """Area-stratified K-fold split as a list of ``(train_idx, test_idx)``."""
    if folds < 2:
        raise DomainError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assign = np.empty(data.n_obs, dtype=np.int64)
    for i in range(data.n_areas):
        idx = np.flatnonzero(data.area == i)
        if 0 < idx.size < folds:
            warnings.warn(f"area {i} has fewer observations ({idx.size}) than folds", stacklevel=2)
        perm = rng.permutation(idx)
        assign[perm] = np.arange(perm.size) % folds
    out = []
    for f in range(folds):
        out.append((np.flatnonzero(assign != f), np.flatnonzero(assign == f)))
    return out


# ------------------------------------------------------------------- outputs

def atomic_write_text(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_density_csv(est, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid", "mean", "lo95", "hi95"])
        for row in zip(est.grid, est.mean, est.lo95, est.hi95):
            w.writerow([repr(float(v)) for v in row])


def read_density_csv(path):
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1]


def write_truth_csv(scenario, path):
    """Long-format ``area,grid,density`` table of the true densities."""
    tab = scenario.true_density_table()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["area", "grid", "density"])
        for i in range(tab.shape[0]):
            for g, v in zip(scenario.grid, tab[i]):
                w.writerow([i, repr(float(g)), repr(float(v))])


def read_truth_csv(path):
    """Return ``(grid, table)`` with ``table[i]`` the density of area ``i``."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    areas = arr[:, 0].astype(int)
    I = areas.max() + 1
    grid = arr[areas == 0, 1]
    return grid, arr[:, 2].reshape(I, grid.size)


CHAIN_FILE = "chain.ndjson"
LOGLIK_FILE = "loglik.npy"
META_FILE = "metadata.json"


def write_chain(chain, directory, metadata=None):
    """Persist a chain: one JSON record per stored state, log-likelihoods as ``.npy``."""
    os.makedirs(directory, exist_ok=True)
    lines = []
    for s in range(len(chain)):
        rec = {"iteration": int(chain.iterations[s])}
        for name in Chain.STATE_FIELDS:
            arr = getattr(chain, name)
            if arr is not None:
                rec[name] = np.asarray(arr[s]).tolist()
        lines.append(json.dumps(rec, separators=(",", ":")))
    atomic_write_text(os.path.join(directory, CHAIN_FILE), "\n".join(lines) + "\n")
    np.save(os.path.join(directory, LOGLIK_FILE), np.ascontiguousarray(chain.loglik, dtype="<f8"))
    meta = dict(metadata or {})
    meta.setdefault("info", chain.info)
    meta["n_states"] = len(chain)
    atomic_write_text(os.path.join(directory, META_FILE), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_chain(directory):
    path = os.path.join(directory, CHAIN_FILE)
    if not os.path.exists(path):
        raise DataError(f"no chain found in {directory}")
    with open(path, encoding="utf-8") as fh:
        recs = [json.loads(ln) for ln in fh if ln.strip()]
    if not recs:
        raise DataError(f"{path}: empty chain")
    kw = {}
    for name in Chain.STATE_FIELDS:
        kw[name] = np.array([r[name] for r in recs]) if name in recs[0] else None
    kw["alloc"] = kw["alloc"].astype(np.int64).reshape(len(recs), -1)
    kw["rho"] = kw["rho"].astype(float)
    for name in ("w_tilde", "m_tilde"):
        if kw[name].ndim == 2:
            kw[name] = kw[name].reshape(len(recs), kw[name].shape[1], 0)
    if kw["sigma"].ndim == 2:
        kw["sigma"] = kw["sigma"].reshape(len(recs), 0, 0)
    ll_path = os.path.join(directory, LOGLIK_FILE)
    loglik = np.load(ll_path) if os.path.exists(ll_path) else np.zeros((len(recs), 0))
    info = {}
    meta_path = os.path.join(directory, META_FILE)
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            info = json.load(fh).get("info", {})
    iters = np.array([r["iteration"] for r in recs])
    return Chain(loglik=loglik, iterations=iters, info=info, **kw)


def read_loglik(path):
    """Log-likelihood table from ``.npy`` or from a chain directory."""
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, LOGLIK_FILE)
    if not os.path.exists(path):
        raise DataError(f"{path}: not found")
    if path.endswith(".npy"):
        arr = np.load(path)
    else:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise DataError("log-likelihood table must be 2-d")
    return arr
