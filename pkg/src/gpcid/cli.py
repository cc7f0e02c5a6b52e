"""Command-line interface.

Exit codes: 0 success, 1 numeric or fit failure, 2 usage or configuration
error. Every subcommand that writes results also writes a JSON summary
carrying the library version and a hash of the effective configuration.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .basis import PolynomialFamily, as_families
from .density import (
    GaussianDensity,
    HistogramDensity,
    MaxEntFitError,
    emd_density,
    fit_gaussian,
    fit_maxent,
    maxent_support,
)
from .gpc import (
    DegenerateDistributionError,
    MomentVector,
    PropagationError,
    build_inner_product_cache,
    expansion_moments,
    project,
    tensor_quadrature,
)
from .mle import (
    ExperimentSet,
    OptimizerConfig,
    PropagationMethod,
    benchmark_mae,
    gen_synthetic,
    identify,
    matching_sample_count,
    reference_log_likelihoods,
)
from .models import (
    CAMELBACK_LIMIT,
    CamelbackExperiments,
    ClutchModel,
    EngagementTimeout,
    ExperimentConfig,
    SingularityError,
    WetClutchParams,
    camelback,
    factorial_design,
    simulate_trace,
)
from .multiindex import CapacityError
from .transform import InputProbabilityModel

log = logging.getLogger("gpcid")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "model": {"name": "camelback", "params": None},
    "gpc": {"d": 4, "q": None, "M": 4, "family": "hermite", "degrees": [1, 2, 3, 4, 5, 6, 7, 8]},
    "density": {"points": 2048, "mc_samples": 200000, "mc_seed": 12345},
    "optimizer": {"population": 50, "generations": 60, "seed": 0, "workers": 1},
    "io": {"out_dir": "out", "cache_dir": None},
}


def load_config(path) -> tuple[dict, Path]:
    """Read a JSON config and merge it over the defaults.

    Returns the merged config and the directory relative paths resolve
    against.
    """
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is None:
        return cfg, Path.cwd()
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise UsageError(f"{path}: top level must be an object")
    for section, values in user.items():
        if section not in cfg:
            raise UsageError(f"{path}: unknown section {section!r} (expected one of {sorted(cfg)})")
        if not isinstance(values, dict):
            raise UsageError(f"{path}: section {section!r} must be an object")
        unknown = set(values) - set(cfg[section])
        if unknown:
            raise UsageError(f"{path}: unknown keys in {section!r}: {sorted(unknown)}")
        cfg[section].update(values)
    return cfg, path.parent.resolve()


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def _write_summary(path: Path, cfg: dict, payload: dict) -> None:
    out = {"version": __version__, "config_hash": config_hash(cfg), "config": cfg}
    out.update(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not serializable: {type(v)}")


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load_json(path, what: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


def _clutch_params(path) -> WetClutchParams:
    if path is None:
        return WetClutchParams()
    data = _load_json(path, "parameter")
    try:
        return WetClutchParams.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _make_model(name: str, params_path=None):
    if name == "camelback":
        return CamelbackExperiments()
    if name == "clutch":
        return ClutchModel(_clutch_params(params_path))
    raise UsageError(f"unknown model {name!r} (expected camelback or clutch)")


def _alpha_from_json(data) -> InputProbabilityModel:
    try:
        if "alpha" in data and isinstance(data["alpha"], dict):
            data = data["alpha"]
        return InputProbabilityModel.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid input model: {exc}") from exc


# ---------------------------------------------------------------------------
# propagate
# ---------------------------------------------------------------------------


def _camelback_oracle_moment(m: int) -> float:
    f = lambda x: camelback(x) ** m * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return integrate.quad(f, -CAMELBACK_LIMIT, CAMELBACK_LIMIT, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def _camelback_oracle_coefficients(index_set, families) -> np.ndarray:
    from .basis import UnivariateBasis

    basis = UnivariateBasis(families[0], index_set.d)
    out = []
    for (j,) in index_set.indices:
        f = lambda x, j=j: camelback(x) * basis.vandermonde(x)[j] * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        out.append(integrate.quad(f, -CAMELBACK_LIMIT, CAMELBACK_LIMIT, epsabs=1e-13, limit=200)[0])
    return np.array(out)


def cmd_propagate(args) -> int:
    cfg, base = load_config(args.config)
    if args.out_dir:
        cfg["io"]["out_dir"] = args.out_dir
    out_dir = _resolve(base, cfg["io"]["out_dir"])
    g = cfg["gpc"]
    model_name = cfg["model"]["name"]
    if model_name != "camelback":
        raise UsageError("propagate supports the camelback model")
    if cfg["model"].get("params"):
        p = _resolve(base, cfg["model"]["params"])
        if not p.is_file():
            raise UsageError(f"parameter file not found: {p}")
    d, M = int(g["d"]), int(g["M"])
    if d < 0 or not 1 <= M <= 5:
        raise UsageError("gpc.d must be >= 0 and gpc.M in 1..5")
    fam = as_families(g["family"], 1)
    if fam[0].kind != "hermite":
        raise UsageError("the camelback demo uses a standard normal input (hermite family)")
    cache_dir = _resolve(base, cfg["io"]["cache_dir"])
    model = lambda th: camelback(np.asarray(th)[:, 0])
    oracle = [_camelback_oracle_moment(m) for m in range(1, 6)]

    coef_rows, moment_rows = [], []
    degrees = sorted(set(int(v) for v in g["degrees"]) | {d})
    for deg in degrees:
        q = int(g["q"]) if g["q"] else deg + 1
        exp = project(model, tensor_quadrature(fam, q, 1), deg, vectorized=True)
        ref = _camelback_oracle_coefficients(exp.index_set, fam)
        for i, (c, r) in enumerate(zip(exp.coefficients, ref)):
            coef_rows.append([deg, q, i, repr(float(c)), repr(float(r))])
        mv = expansion_moments(exp, min(5, max(M, 4)), cache_dir=cache_dir)
        for m in range(1, mv.order + 1):
            err = abs(mv[m] - oracle[m - 1]) / abs(oracle[m - 1])
            moment_rows.append([deg, q, m, repr(mv[m]), repr(oracle[m - 1]), repr(err)])
    _write_csv(out_dir / "coefficients.csv", ["d", "q", "index", "gpc", "reference"], coef_rows)
    _write_csv(out_dir / "moments.csv", ["d", "q", "m", "gpc", "oracle", "rel_error"], moment_rows)

    q = int(g["q"]) if g["q"] else d + 1
    exp = project(model, tensor_quadrature(fam, q, 1), d, vectorized=True)
    mv = expansion_moments(exp, M, cache_dir=cache_dir)
    dens_cfg = cfg["density"]
    rng = np.random.default_rng(int(dens_cfg["mc_seed"]))
    theta = rng.standard_normal(int(dens_cfg["mc_samples"]))
    theta = theta[np.abs(theta) <= CAMELBACK_LIMIT]
    reference = HistogramDensity(camelback(theta))
    summary = {"d": d, "q": q, "M": M, "moments": list(mv.raw), "evaluations": exp.evaluations}
    maxent = None
    if M < 2 or not mv.variance > 1e-12 * max(1.0, mv[1] ** 2):
        # constant expansion: report a near-point normal
        gauss = GaussianDensity(mv[1], 1e-6 * max(1.0, abs(mv[1])))
    else:
        gauss = fit_gaussian(mv)
        try:
            maxent = fit_maxent(mv, maxent_support(mv, exp.node_values))
        except (MaxEntFitError, DegenerateDistributionError) as exc:
            summary["maxent_error"] = str(exc)
    lo, hi = reference.effective_support()
    grid = np.linspace(min(lo, gauss.mean - 6 * gauss.std), max(hi, gauss.mean + 6 * gauss.std),
                       int(dens_cfg["points"]))
    rows = []
    cols = [reference.pdf(grid), gauss.pdf(grid)] + ([maxent.pdf(grid)] if maxent else [])
    for k, y in enumerate(grid):
        rows.append([repr(float(y))] + [repr(float(c[k])) for c in cols])
    _write_csv(out_dir / "density.csv", ["y", "reference", "gaussian"] + (["maxent"] if maxent else []), rows)
    summary["emd_gaussian"] = emd_density(gauss, reference, grid)
    if maxent is not None:
        summary["emd_maxent"] = emd_density(maxent, reference, grid)
        summary["lambda"] = maxent.lam.tolist()
        summary["maxent_support"] = [maxent.lower, maxent.upper]
        summary["emd_reduction"] = 1.0 - summary["emd_maxent"] / summary["emd_gaussian"]
    _write_summary(out_dir / "summary.json", cfg, summary)
    print(json.dumps({k: summary[k] for k in summary if k.startswith("emd")}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# cache-build
# ---------------------------------------------------------------------------


def cmd_cache_build(args) -> int:
    try:
        fams = [PolynomialFamily.from_token(t) for t in args.family.split(",")]
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --family: {exc}") from exc
    if len(fams) == 1:
        fams = fams * args.n
    if len(fams) != args.n:
        raise UsageError(f"--family lists {len(fams)} families for n={args.n}")
    cache = build_inner_product_cache(args.n, args.d, args.m, fams, workers=args.workers, tol=args.tol,
                                      max_moment=args.max_moment, size_guard=args.size_guard)
    cache.save(args.out)
    print(f"{cache.header()} entries={len(cache)} candidates={cache.candidates}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit-density
# ---------------------------------------------------------------------------


def cmd_fit_density(args) -> int:
    data = _load_json(args.moments, "moment")
    raw = data.get("moments") if isinstance(data, dict) else data
    if not isinstance(raw, list) or not raw:
        raise UsageError(f"{args.moments}: expected a list of raw moments or {{\"moments\": [...]}}")
    try:
        mv = MomentVector(tuple(float(v) for v in raw))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.moments}: {exc}") from exc
    support = tuple(args.support) if args.support else (tuple(data["support"]) if isinstance(data, dict)
                                                         and data.get("support") else None)
    if args.method == "gaussian":
        dens = fit_gaussian(mv)
        lo, hi = dens.effective_support(6.0)
        result = {"method": "gaussian", "mean": dens.mean, "std": dens.std}
    else:
        dens = fit_maxent(mv, support)
        lo, hi = dens.lower, dens.upper
        result = {"method": "maxent", "lambda": dens.lam.tolist(), "shift": dens.shift, "scale": dens.scale,
                  "support": [dens.lower, dens.upper], "iterations": dens.iterations, "residual": dens.residual}
    grid = np.linspace(lo, hi, args.points)
    _write_csv(Path(args.curve), ["y", "pdf"], [[repr(float(y)), repr(float(p))] for y, p in zip(grid, dens.pdf(grid))])
    cfg = {"moments": list(mv.raw), "method": args.method, "support": support, "points": args.points}
    _write_summary(Path(args.out), cfg, result)
    print(json.dumps(result))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate-clutch
# ---------------------------------------------------------------------------


def cmd_simulate_clutch(args) -> int:
    params = _clutch_params(args.params)
    config = ExperimentConfig(1, args.dt, args.u0, args.du, args.omega_m, args.load)
    trace = simulate_trace(config, params, (args.x1, args.x2), h=args.h, horizon=args.horizon)
    trace.to_csv(args.out)
    print(json.dumps({"shifting_time_s": trace.shifting_time}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen-synthetic / identify / benchmark
# ---------------------------------------------------------------------------


def _design(model_name: str, count: int):
    if model_name == "clutch":
        design = factorial_design()
        if count > len(design):
            raise UsageError(f"the clutch design has {len(design)} operating points")
        return design[:count]
    return [ExperimentConfig(l=l) for l in range(1, count + 1)]


def cmd_gen_synthetic(args) -> int:
    alpha = _alpha_from_json(_load_json(args.alpha, "input model"))
    model = _make_model(args.model, args.params)
    if alpha.n != model.n_inputs:
        raise UsageError(f"input model has {alpha.n} components, {args.model} needs {model.n_inputs}")
    exps = gen_synthetic(alpha, model, _design(args.model, args.n_experiments), args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    exps.to_csv(args.out)
    truth = {"model": args.model, "seed": args.seed, "n_experiments": args.n_experiments, "alpha": alpha.to_dict()}
    run_cfg = {k: v for k, v in vars(args).items() if k != "func"}
    _write_summary(Path(args.truth), run_cfg, truth)
    return EXIT_OK


def _parse_bounds(data, n_inputs):
    try:
        lo = [float(v) for v in data["mean_lower"]] + [float(v) for v in data["std_lower"]]
        hi = [float(v) for v in data["mean_upper"]] + [float(v) for v in data["std_upper"]]
        clip_lo = data.get("clip_lower")
        clip_hi = data.get("clip_upper")
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bounds file: {exc}") from exc
    if len(lo) != 2 * n_inputs or len(hi) != 2 * n_inputs:
        raise UsageError(f"bounds must cover {n_inputs} means and {n_inputs} stds")
    conv = lambda v, fill: None if v is None else [fill if x is None else float(x) for x in v]
    return lo, hi, conv(clip_lo, -math.inf), conv(clip_hi, math.inf)


def cmd_identify(args) -> int:
    cfg, base = load_config(args.config)
    opt_cfg = cfg["optimizer"]
    for key, val in (("population", args.pop), ("generations", args.gens), ("seed", args.seed),
                     ("workers", args.workers)):
        if val is not None:
            opt_cfg[key] = val
    g = cfg["gpc"]
    for key, val in (("d", args.d), ("q", args.q), ("M", args.M)):
        if val is not None:
            g[key] = val
    model_name = args.model or cfg["model"]["name"]
    params = args.params or (_resolve(base, cfg["model"]["params"]) if cfg["model"]["params"] else None)
    model = _make_model(model_name, params)
    exps = ExperimentSet.from_csv(args.experiments) if Path(args.experiments).is_file() else None
    if exps is None:
        raise UsageError(f"experiments file not found: {args.experiments}")
    lo, hi, clip_lo, clip_hi = _parse_bounds(_load_json(args.bounds, "bounds"), model.n_inputs)
    method = PropagationMethod(args.method, int(g["d"]), g["q"], int(g["M"]), args.samples,
                               int(opt_cfg["seed"]))
    opt = OptimizerConfig(int(opt_cfg["population"]), int(opt_cfg["generations"]), seed=int(opt_cfg["seed"]),
                          workers=int(opt_cfg["workers"]))
    result = identify(exps, model, lo, hi, method, opt, clip_lo, clip_hi)
    run_cfg = {"args": {k: v for k, v in vars(args).items() if k != "func"}, **cfg}
    _write_summary(Path(args.out), run_cfg, result.to_dict())
    print(json.dumps({"alpha": result.alpha.alpha.tolist(), "log_likelihood": result.log_likelihood}))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    model = _make_model(args.model, args.params)
    exps = ExperimentSet.from_csv(args.experiments) if Path(args.experiments).is_file() else None
    if exps is None:
        raise UsageError(f"experiments file not found: {args.experiments}")
    alpha = _alpha_from_json(_load_json(args.alpha, "input model"))
    ref = reference_log_likelihoods(alpha, exps, model, S=args.reference_samples, seed=args.reference_seed,
                                    cache_path=args.reference_cache)
    chaos = [PropagationMethod("gpc_maxent", args.d, args.q, args.M),
             PropagationMethod("gpc_gaussian", args.d, args.q)]
    sampling = [PropagationMethod(kind, samples=S, seed=args.seed) for kind in ("mc", "qmc") for S in args.samples]
    rows = benchmark_mae(alpha, exps, model, chaos + sampling, ref, replicates=args.replicates)
    target = rows[0]["mae"]
    matched = {}
    for kind in ("mc", "qmc"):
        sub = [r for r in rows if r["method"] == kind]
        matched[kind] = matching_sample_count([r["evaluations"] for r in sub], [r["mae"] for r in sub], target)
    header = ["method", "samples", "evaluations", "mae", "mae_sd"]
    _write_csv(Path(args.out), header, [[r[h] if r[h] is not None else "" for h in header] for r in rows])
    dat = Path(args.dat) if args.dat else Path(args.out).with_suffix(".dat")
    with open(dat, "w") as fh:
        fh.write("# evaluations mae_mc mae_qmc mae_gpc_maxent mae_gpc_gaussian\n")
        mc = {r["samples"]: r for r in rows if r["method"] == "mc"}
        qmc = {r["samples"]: r for r in rows if r["method"] == "qmc"}
        for S in args.samples:
            fh.write(f"{S} {mc[S]['mae']:.10g} {qmc[S]['mae']:.10g} {rows[0]['mae']:.10g} {rows[1]['mae']:.10g}\n")
    summary = {"rows": rows, "matching_samples": {k: (None if math.isinf(v) else v) for k, v in matched.items()},
               "matching_exceeds_grid": {k: math.isinf(v) for k, v in matched.items()}}
    run_cfg = {k: v for k, v in vars(args).items() if k != "func"}
    _write_summary(Path(args.summary) if args.summary else Path(args.out).with_suffix(".json"), run_cfg, summary)
    print(json.dumps(summary["matching_samples"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gpcid", description="Polynomial chaos propagation and input-model identification.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("propagate", help="camelback propagation demo")
    s.add_argument("--config", help="JSON config (sections model, gpc, density, optimizer, io)")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_propagate)

    s = sub.add_parser("cache-build", help="build an inner-product cache file")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--family", default="hermite", help="token or comma list, e.g. hermite or jacobi:0.5:1")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-moment", type=int, default=5)
    s.add_argument("--size-guard", type=int, default=10**8)
    s.set_defaults(func=cmd_cache_build)

    s = sub.add_parser("fit-density", help="fit a density to a moment vector")
    s.add_argument("--moments", required=True, help="JSON list or {\"moments\": [...], \"support\": [lo, hi]}")
    s.add_argument("--method", choices=("maxent", "gaussian"), default="maxent")
    s.add_argument("--support", type=float, nargs=2)
    s.add_argument("--points", type=int, default=512)
    s.add_argument("--out", required=True, help="JSON with the fitted parameters")
    s.add_argument("--curve", required=True, help="CSV y,pdf")
    s.set_defaults(func=cmd_fit_density)

    s = sub.add_parser("simulate-clutch", help="simulate one clutch engagement")
    s.add_argument("--params", help="WetClutchParams JSON")
    s.add_argument("--dt", type=float, default=0.12)
    s.add_argument("--u0", type=float, default=0.30)
    s.add_argument("--du", type=float, default=0.10)
    s.add_argument("--omega-m", type=float, default=1350.0)
    s.add_argument("--load", choices=("low", "high"), default="low")
    s.add_argument("--x1", type=float, default=1.0)
    s.add_argument("--x2", type=float, default=1.0)
    s.add_argument("--h", type=float, default=5e-4)
    s.add_argument("--horizon", type=float, default=5.0)
    s.add_argument("--out", required=True, help="trace CSV t,p_hc,z,omega1,omega2,Tc,u")
    s.set_defaults(func=cmd_simulate_clutch)

    s = sub.add_parser("gen-synthetic", help="draw a synthetic experiment set")
    s.add_argument("--model", choices=("camelback", "clutch"), default="camelback")
    s.add_argument("--params")
    s.add_argument("--alpha", required=True, help="JSON with mean, std, lower, upper")
    s.add_argument("--n-experiments", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="experiments CSV")
    s.add_argument("--truth", required=True, help="ground-truth JSON")
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("identify", help="maximum-likelihood input model")
    s.add_argument("--config")
    s.add_argument("--experiments", required=True)
    s.add_argument("--model", choices=("camelback", "clutch"))
    s.add_argument("--params")
    s.add_argument("--method", choices=("gpc-gauss", "gpc-maxent", "mc", "qmc"), default="gpc-maxent")
    s.add_argument("--d", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--M", type=int)
    s.add_argument("--samples", type=int, default=1000, help="samples per experiment for mc/qmc")
    s.add_argument("--pop", type=int)
    s.add_argument("--gens", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--bounds", required=True,
                   help="JSON with mean_lower, mean_upper, std_lower, std_upper, optional clip_lower/clip_upper")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("benchmark", help="log-likelihood MAE of each method against a large Monte Carlo run")
    s.add_argument("--experiments", required=True)
    s.add_argument("--model", choices=("camelback", "clutch"), default="camelback")
    s.add_argument("--params")
    s.add_argument("--alpha", required=True)
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--q", type=int)
    s.add_argument("--M", type=int, default=4)
    s.add_argument("--samples", type=int, nargs="+",
                   default=[25, 50, 100, 250, 500, 1000, 2500, 5000, 10000, 25000, 50000])
    s.add_argument("--replicates", type=int, default=5)
    s.add_argument("--seed", type=int, default=100)
    s.add_argument("--reference-samples", type=int, default=200000)
    s.add_argument("--reference-seed", type=int, default=12345)
    s.add_argument("--reference-cache")
    s.add_argument("--out", required=True, help="MAE table CSV")
    s.add_argument("--dat", help="gnuplot data file (default: --out with .dat)")
    s.add_argument("--summary", help="JSON summary (default: --out with .json)")
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngagementTimeout, SingularityError, MaxEntFitError, DegenerateDistributionError, PropagationError,
            ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
