"""Command-line entry point: ``spmix <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (a flat JSON object whose keys
are the long option names with dashes or underscores); explicit flags
override the file. Each output directory receives ``manifest.json`` with
the resolved configuration, input digests, output paths and timing.

Exit status: 0 on success, 2 on usage/configuration errors, 1 on runtime errors.
"""

import argparse
import csv
import hashlib
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import kendalltau

from . import __version__
from .data_io import (
    SCENARIOS,
    atomic_write_text,
    generate_scenario,
    read_chain,
    read_dataset,
    read_loglik,
    read_truth_csv,
    stratified_cv_split,
    write_chain,
    write_dataset,
    write_density_csv,
    write_truth_csv,
)
from .errors import SpmixError
from .gibbs import ChainConfig, run_chain
from .graph import ProximityGraph, read_adjacency, write_adjacency
from .logistic_mcar import (
    CkSsmParams,
    LogisticMcarParams,
    active_components,
    inclusion_probability,
    sample_ck_ssm_prior,
    sample_dirichlet,
    sample_prior,
    sample_sparse_prior,
    summarize,
)
from .metrics import hellinger_grid, kl_divergence_grid, lpml, pmse, waic
from .model import PriorConfig, default_grid, posterior_mean_density, predictive_mean


class UsageError(Exception):
    pass


DEFAULTS = {
    "prior-sample": dict(
        prior="logistic-mcar", H=30, areas=1, adjacency=None, rho=None, eta2=9.0,
        sigma_scale=1.0, a=0.1, b=0.5, tau2=1.0, alpha=1.0, draws=10000, seed=0,
        threshold=0.01, inclusion_threshold=0.05, out="prior_out", write_draws=True,
    ),
    "simulate": dict(scenario=None, seed=0, out="sim_out"),
    "fit": dict(
        data=None, adjacency=None, H=10, burnin=10000, samples=10000, thin=5, seed=0,
        variant="plain", mu0=0.0, lam=0.1, a=2.0, b=2.0, nu=100.0, eta2=9.0,
        sigma2_beta=10.0, rho_sd=0.1, chains=1, center=False, standardize=True, out="fit_out",
    ),
    "estimate": dict(
        chain=None, data=None, adjacency=None, truth=None, grid_min=None, grid_max=None,
        grid_points=500, x=None, center=False, standardize=True, out="estimate_out",
    ),
    "diagnostics": dict(loglik=None, predictions=None),
    "cv": dict(
        data=None, adjacency=None, folds=10, H=10, burnin=2000, samples=2000, thin=5, seed=0,
        variant="plain", mu0=0.0, lam=0.1, a=2.0, b=2.0, nu=100.0, eta2=9.0,
        sigma2_beta=10.0, rho_sd=0.1, center=False, standardize=True, out="cv_out",
    ),
}


def _add_fit_options(p):
    p.add_argument("--data", help="observation CSV (area,y[,x1..xd])")
    p.add_argument("--adjacency", help="adjacency file")
    p.add_argument("--H", type=int, help="number of mixture components")
    p.add_argument("--burnin", type=int)
    p.add_argument("--samples", type=int, help="post burn-in sweeps (stored: samples // thin)")
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=("plain", "m1", "m2"))
    p.add_argument("--mu0", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--eta2", type=float)
    p.add_argument("--sigma2-beta", type=float)
    p.add_argument("--rho-sd", type=float)
    p.add_argument("--center", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--no-standardize", dest="standardize", action="store_false",
                   default=argparse.SUPPRESS)
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(prog="spmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file of option values")
        return p

    p = add("prior-sample", "Monte Carlo draws from weight priors")
    p.add_argument("--prior", choices=("logistic-mcar", "ck-ssm", "dirichlet"))
    p.add_argument("--H", type=int)
    p.add_argument("--areas", type=int)
    p.add_argument("--adjacency")
    p.add_argument("--rho", type=float, help="default 0 for one area, else 0.95")
    p.add_argument("--eta2", type=float, help="variance of m_tilde (0 fixes m_tilde = 0)")
    p.add_argument("--sigma-scale", type=float, help="Sigma = scale * I")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--alpha", type=float, help="symmetric Dirichlet parameter")
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, help="active-component threshold")
    p.add_argument("--inclusion-threshold", type=float)
    p.add_argument("--no-draws", dest="write_draws", action="store_false")
    p.add_argument("--out")

    p = add("simulate", "generate a simulation scenario")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("fit", "run the Gibbs sampler")
    _add_fit_options(p)
    p.add_argument("--chains", type=int)

    p = add("estimate", "posterior mean densities from a stored chain")
    p.add_argument("--chain", help="chain directory")
    p.add_argument("--data")
    p.add_argument("--adjacency")
    p.add_argument("--truth", help="true-density CSV (area,grid,density)")
    p.add_argument("--grid-min", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--x", help="comma-separated covariate row (M1/M2)")
    p.add_argument("--center", action="store_true")
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("--out")

    p = add("diagnostics", "LPML / WAIC (and pMSE) report")
    p.add_argument("--loglik", help=".npy, CSV, or chain directory")
    p.add_argument("--predictions", help="CSV with columns predicted,observed")

    p = add("cv", "area-stratified cross-validated pMSE")
    _add_fit_options(p)
    p.add_argument("--folds", type=int)
    return parser


def resolve(command, args):
    cfg = dict(DEFAULTS[command])
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in file_cfg.items():
            key = k.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown config key {k!r}")
            cfg[key] = v
    cfg.update(given)
    return cfg


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out, command, cfg, inputs, outputs, t0, argv):
    manifest = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "config": cfg,
        "seed": cfg.get("seed"),
        "inputs": {p: _digest(p) for p in inputs if p and os.path.isfile(p)},
        "outputs": sorted(outputs),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
        "wall_time": time.time() - t0,
    }
    atomic_write_text(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2) + "\n")


def _csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


# ------------------------------------------------------------------ commands

def cmd_prior_sample(cfg):
    if cfg["draws"] < 1:
        raise UsageError("--draws must be at least 1")
    if cfg["H"] < 2:
        raise UsageError("--H must be at least 2")
    if cfg["adjacency"]:
        graph = read_adjacency(cfg["adjacency"])
    else:
        if cfg["areas"] < 1:
            raise UsageError("--areas must be positive")
        graph = ProximityGraph.empty(cfg["areas"])
    I, H, n = graph.n_areas, cfg["H"], cfg["draws"]
    rho = cfg["rho"]
    if rho is None:
        rho = 0.0 if I == 1 else 0.95
        cfg["rho"] = rho
    if not 0.0 <= rho < 1.0:
        raise UsageError("--rho must lie in [0, 1)")
    rng = np.random.default_rng(cfg["seed"])
    prior = cfg["prior"]
    if prior == "logistic-mcar":
        if cfg["eta2"] < 0 or cfg["sigma_scale"] <= 0:
            raise UsageError("--eta2 must be >= 0 and --sigma-scale > 0")
        sigma = cfg["sigma_scale"] * np.eye(H - 1)
        if cfg["eta2"] == 0:
            k = graph.components.n_components
            w = sample_prior(LogisticMcarParams(np.zeros((k, H - 1)), rho, sigma, graph), n, rng)
        else:
            w = sample_sparse_prior(graph, H, cfg["eta2"], rho, sigma, n, rng)
    elif prior == "ck-ssm":
        params = CkSsmParams(cfg["a"], cfg["b"], cfg["tau2"], rho, H, graph)
        w = sample_ck_ssm_prior(params, n, rng)
    else:
        if cfg["alpha"] <= 0:
            raise UsageError("--alpha must be positive")
        w = sample_dirichlet(np.full(H, cfg["alpha"]), n * I, rng).reshape(n, I, H)

    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    outputs = []
    if cfg["write_draws"]:
        path = os.path.join(out, "weights.csv")
        d, a, h = np.meshgrid(np.arange(n), np.arange(I), np.arange(H), indexing="ij")
        _csv(path, ["draw_index", "area", "h", "weight"],
             zip(d.ravel(), a.ravel(), h.ravel(), map(_fmt, w.ravel())))
        outputs.append(path)
    act = active_components(w, cfg["threshold"]).ravel()
    counts = np.bincount(act, minlength=H + 1)
    path = os.path.join(out, "active_components.csv")
    _csv(path, ["n_active", "count", "frequency"],
         [(k, int(c), _fmt(c / act.size)) for k, c in enumerate(counts)])
    outputs.append(path)
    incl = inclusion_probability(w, cfg["inclusion_threshold"])
    path = os.path.join(out, "inclusion.csv")
    _csv(path, ["h", "probability"], [(h, _fmt(p)) for h, p in enumerate(incl)])
    outputs.append(path)
    if I > 1:
        path = os.path.join(out, "distances.csv")
        rows = []
        for i, j in itertools.combinations(range(I), 2):
            s = summarize(np.linalg.norm(w[:, i] - w[:, j], axis=1))
            rows.append((i, j, *map(_fmt, s.values())))
        _csv(path, ["area_i", "area_j", "min", "q25", "median", "q75", "max"], rows)
        outputs.append(path)
    tau = kendalltau(np.arange(H), incl)[0]
    print(f"mean active components: {act.mean():.4f}")
    print(f"kendall tau of inclusion probability over h: {tau:.4f}")
    return out, [cfg["adjacency"]], outputs


def cmd_simulate(cfg):
    if cfg["scenario"] is None:
        raise UsageError("--scenario is required")
    if cfg["scenario"] not in SCENARIOS:
        raise UsageError(f"unknown scenario {cfg['scenario']!r}")
    sc = generate_scenario(cfg["scenario"], cfg["seed"])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, f) for f in ("observations.csv", "adjacency.txt", "truth.csv")]
    write_dataset(sc.data, paths[0])
    write_adjacency(sc.data.graph, paths[1])
    write_truth_csv(sc, paths[2])
    print(f"scenario {sc.name}: {sc.data.n_areas} areas, {sc.data.n_obs} observations")
    return out, [], paths


def _load_data(cfg):
    if not cfg["data"] or not cfg["adjacency"]:
        raise UsageError("--data and --adjacency are required")
    return read_dataset(cfg["data"], cfg["adjacency"], center=cfg["center"],
                        standardize=cfg["standardize"])


def _chain_config(cfg, seed):
    if cfg["samples"] < cfg["thin"]:
        raise UsageError("--samples must be at least --thin")
    prior = PriorConfig(H=cfg["H"], mu0=cfg["mu0"], lam=cfg["lam"], a=cfg["a"], b=cfg["b"],
                        nu=cfg["nu"], eta2=cfg["eta2"], variant=cfg["variant"],
                        sigma2_beta=cfg["sigma2_beta"])
    return ChainConfig(n_burnin=cfg["burnin"], n_samples=cfg["samples"] // cfg["thin"],
                       thin=cfg["thin"], seed=seed, rho_sd=cfg["rho_sd"], prior=prior)


def _check_variant(cfg, data):
    if cfg["variant"] != "plain" and data.n_covariates == 0:
        raise UsageError(f"--variant {cfg['variant']} needs covariate columns in the data")


def _fit_one(args):
    config, data, directory, cfg = args
    chain = run_chain(config, data)
    meta = {"config": cfg, "seed": config.seed, "version": __version__,
            "prior": config.prior.to_dict()}
    write_chain(chain, directory, meta)
    return directory, len(chain), chain.info["pg_approximation"]


def cmd_fit(cfg):
    data = _load_data(cfg)
    _check_variant(cfg, data)
    k = cfg["chains"]
    if k < 1:
        raise UsageError("--chains must be positive")
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    jobs = []
    for c in range(k):
        d = os.path.join(out, "chain" if k == 1 else f"chain_{c}")
        jobs.append((_chain_config(cfg, cfg["seed"] + c), data, d, cfg))
    if k == 1:
        results = [_fit_one(jobs[0])]
    else:
        workers = min(k, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fit_one, jobs))
    outputs = []
    for d, n_states, approx in results:
        outputs += [os.path.join(d, f) for f in ("chain.ndjson", "loglik.npy", "metadata.json")]
        print(f"{d}: {n_states} stored states" + (" (PG Gaussian approximation used)" if approx else ""))
    return out, [cfg["data"], cfg["adjacency"]], outputs


def cmd_estimate(cfg):
    if not cfg["chain"]:
        raise UsageError("--chain is required")
    chain = read_chain(cfg["chain"])
    I = chain.w_tilde.shape[1]
    truth = None
    if cfg["truth"]:
        grid, truth = read_truth_csv(cfg["truth"])
    elif cfg["grid_min"] is not None and cfg["grid_max"] is not None:
        grid = np.linspace(cfg["grid_min"], cfg["grid_max"], cfg["grid_points"])
    elif cfg["data"] and cfg["adjacency"]:
        grid = default_grid(_load_data(cfg).y, cfg["grid_points"])
    else:
        raise UsageError("give --truth, --grid-min/--grid-max, or --data/--adjacency for the grid")
    x = None
    d = 0 if chain.beta is None else chain.beta.shape[1]
    if chain.beta_h is not None:
        d = chain.beta_h.shape[2]
    if d:
        x = np.zeros(d) if cfg["x"] is None else np.array([float(v) for v in cfg["x"].split(",")])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    outputs, rows = [], []
    for i in range(I):
        est = posterior_mean_density(chain, i, grid, x)
        path = os.path.join(out, f"density_area{i}.csv")
        write_density_csv(est, path)
        outputs.append(path)
        if truth is not None:
            kl = kl_divergence_grid((grid, truth[i]), (grid, est.mean))
            hd = hellinger_grid((grid, truth[i]), (grid, est.mean))
            rows.append((i, _fmt(kl), _fmt(hd)))
            print(f"area {i}: KL {kl:.4f}  Hellinger {hd:.4f}")
    if rows:
        path = os.path.join(out, "errors.csv")
        _csv(path, ["area", "kl", "hellinger"], rows)
        outputs.append(path)
    return out, [cfg["truth"], os.path.join(cfg["chain"], "chain.ndjson")], outputs


def cmd_diagnostics(cfg):
    if not cfg["loglik"]:
        raise UsageError("--loglik is required")
    ll = read_loglik(cfg["loglik"])
    print(f"LPML: {lpml(ll):.10g}")
    print(f"WAIC: {waic(ll):.10g}" if ll.shape[0] >= 2 else "WAIC: nan")
    if cfg["predictions"]:
        arr = np.loadtxt(cfg["predictions"], delimiter=",", skiprows=1, ndmin=2)
        print(f"pMSE: {pmse(arr[:, 0], arr[:, 1]):.10g}")
    return None, [], []


def cmd_cv(cfg):
    data = _load_data(cfg)
    _check_variant(cfg, data)
    folds = cfg["folds"]
    if folds < 2:
        raise UsageError("--folds must be at least 2")
    config = _chain_config(cfg, cfg["seed"])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    rows, fold_rows = [], []
    for f, (train, test) in enumerate(stratified_cv_split(data, folds, cfg["seed"])):
        chain = run_chain(ChainConfig(**{**config.__dict__, "seed": cfg["seed"] + f}),
                          data.subset(train))
        xt = None if data.x is None else data.x[test]
        pred = predictive_mean(chain, data.area[test], xt)
        fold_rows.append((f, test.size, _fmt(pmse(pred, data.y[test]))))
        for j, p in zip(test, pred):
            rows.append((int(j), int(data.area[j]), f, _fmt(data.y[j]), _fmt(p)))
    rows.sort()
    paths = [os.path.join(out, "predictions.csv"), os.path.join(out, "folds.csv")]
    _csv(paths[0], ["index", "area", "fold", "observed", "predicted"], rows)
    _csv(paths[1], ["fold", "n_test", "pmse"], fold_rows)
    total = pmse([float(r[4]) for r in rows], [float(r[3]) for r in rows])
    print(f"pMSE: {total:.10g}")
    return out, [cfg["data"], cfg["adjacency"]], paths


COMMANDS = {
    "prior-sample": cmd_prior_sample,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "estimate": cmd_estimate,
    "diagnostics": cmd_diagnostics,
    "cv": cmd_cv,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    t0 = time.time()
    try:
        cfg = resolve(args.command, args)
        out, inputs, outputs = COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (SpmixError, OSError, ValueError) as exc:
        print(f"spmix {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if out is not None:
        write_manifest(out, args.command, cfg, inputs, outputs, t0, argv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
