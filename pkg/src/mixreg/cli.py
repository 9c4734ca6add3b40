"""Command-line front end: ``mixreg check|sample|diagnose --config FILE``.

Exit codes
----------
0  success (``check``: TraceClass or GeometricallyErgodic)
1  input, configuration or propriety failure
2  ``check``: NotApplicable or Inconclusive; ``sample``: refused without
   ``--force``; ``diagnose``: some agreement check failed
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from mixreg.chains import ChainConfig, run_chain, summarize
from mixreg.checker import Verdict, certify, check_haar_existence
from mixreg.config import ConfigError, DataError, RunConfig, effective_seed
from mixreg.model import RegressionData, validate_data

log = logging.getLogger("mixreg")

EXIT_OK, EXIT_FAIL, EXIT_UNCERTIFIED = 0, 1, 2


class CommandError(RuntimeError):
    """Fatal error with a message for the user (exit 1)."""


# -- shared plumbing -------------------------------------------------------------------

def _setup(args):
    cfg = RunConfig.load(args.config)
    cfg = cfg.with_seed(effective_seed(cfg, args.seed))
    if getattr(args, "algorithm", None):
        cfg = replace(cfg, chain=replace(cfg.chain, algorithm=args.algorithm))
    y, X = cfg.load_data()
    try:
        data = RegressionData(y, X, cfg.model.a)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    h = cfg.mixing_density(data.d)
    out = Path(args.out) if args.out else cfg.resolve(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, data, h, out


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _certify(cfg, data, h):
    triple = None
    if cfg.check.rho is not None:
        triple = (cfg.check.rho, cfg.check.tau, cfg.check.search_eta or cfg.check.eta)
    return certify(h, data.n, data.p, data.d, data.a, zeta=cfg.check.zeta, eta=cfg.check.eta,
                   triple=triple)


def _propriety(data, h):
    report = validate_data(data, h)
    if not report.proper:
        failed = [c.name for c in report.checks if c.name in ("S1", "S2", "S3", "S4") and not c.passed]
        return report, f"posterior propriety not established: {', '.join(failed)} failed"
    return report, None


# -- check -----------------------------------------------------------------------------

def command_check(args) -> int:
    cfg, data, h, out = _setup(args)
    report, problem = _propriety(data, h)
    result = {"propriety": report.as_dict(), "config_hash": cfg.semantic_hash()}
    if problem:
        result["error"] = problem
        _emit(out, "certificate", result, problem + "\n", cfg)
        log.error(problem)
        return EXIT_FAIL
    cert = _certify(cfg, data, h)
    result["certificate"] = cert.to_dict()
    text = _propriety_text(report) + cert.to_text()
    _emit(out, "certificate", result, text, cfg)
    print(f"verdict: {cert.verdict.value} ({cert.path})")
    ok = cert.verdict in (Verdict.TRACE_CLASS, Verdict.GEOMETRICALLY_ERGODIC)
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def _propriety_text(report):
    lines = ["propriety:"]
    for c in report.checks:
        flag = {True: "pass", False: "fail", None: "n/a"}[c.passed]
        if c.name not in ("S1", "S2", "S3", "S4"):
            flag = "info"
        lines.append(f"  [{flag}] {c.name}  {c.detail}")
    return "\n".join(lines) + "\n"


def _emit(out: Path, stem: str, obj, text: str, cfg):
    if "json" in cfg.output.formats:
        _write_json(out / f"{stem}.json", obj)
    if "text" in cfg.output.formats:
        (out / f"{stem}.txt").write_text(text)


# -- sample ----------------------------------------------------------------------------

def draw_columns(p, d):
    cols = [f"beta[{i},{j}]" for i in range(p) for j in range(d)]
    cols += [f"sigma[{i},{j}]" for j in range(d) for i in range(j, d)]
    return cols


def flatten_draws(output):
    """Rows of ``beta`` (row-major) followed by the lower triangle of ``Sigma`` (column-major)."""
    N, p, d = output.beta.shape
    rows, cols = np.tril_indices(d)
    order = np.lexsort((rows, cols))          # column-major over the lower triangle
    tri = output.sigma[:, rows[order], cols[order]]
    return np.hstack([output.beta.reshape(N, p * d), tri])


def write_draws(path: Path, output):
    N, p, d = output.beta.shape
    flat = flatten_draws(output)
    with open(path, "w", newline="") as fh:
        # names such as beta[0,1] contain commas, so the header is quoted
        csv.writer(fh, lineterminator="\n").writerow(["iteration"] + draw_columns(p, d))
        for it, row in zip(output.iterations, flat):
            fh.write(str(int(it)) + "," + ",".join("%.17g" % v for v in row) + "\n")


def load_draws(path):
    """``(iterations, column names, values)`` from a draws file."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0].astype(np.int64), header[1:], arr[:, 1:]


def summarize_columns(names, values):
    return {name: summarize(values[:, k]) for k, name in enumerate(names)}


def command_sample(args) -> int:
    cfg, data, h, out = _setup(args)
    report, problem = _propriety(data, h)
    if problem:
        log.error(problem)
        return EXIT_FAIL
    if cfg.chain.algorithm == "pxda":
        haar = check_haar_existence(h, data.n, data.d, data.a)
        if not haar["holds"]:
            log.error("Haar PX-DA requested but its rescaling density could not be certified: %s",
                      haar["moment"].detail)
            return EXIT_FAIL
    if not args.force:
        cert = _certify(cfg, data, h)
        if cert.verdict not in (Verdict.TRACE_CLASS, Verdict.GEOMETRICALLY_ERGODIC):
            log.error("chain convergence not certified (%s); rerun with --force to sample anyway",
                      cert.verdict.value)
            return EXIT_UNCERTIFIED
    chain_cfg = ChainConfig(cfg.chain.algorithm, cfg.chain.iterations, cfg.chain.burn_in,
                            cfg.chain.thin, cfg.chain.seed)
    output = run_chain(chain_cfg, data, h)
    write_draws(out / "draws.csv", output)
    names = draw_columns(data.p, data.d)
    summary = {
        "algorithm": cfg.chain.algorithm,
        "seed": cfg.chain.seed,
        "config_hash": cfg.semantic_hash(),
        "iterations": cfg.chain.iterations,
        "burn_in": cfg.chain.burn_in,
        "thin": cfg.chain.thin,
        "retained": len(output),
        "wall_time_s": output.metadata["wall_time_s"],
        "failure": output.failure,
        "columns": summarize_columns(names, flatten_draws(output)) if len(output) > 1 else {},
    }
    _emit(out, "summary", summary, _summary_text(summary), cfg)
    if output.failure:
        log.error("sampler failed: %s (partial output written)", output.failure)
        return EXIT_FAIL
    print(f"wrote {len(output)} draws to {out / 'draws.csv'}")
    return EXIT_OK


def _summary_text(s):
    lines = [f"{k}: {s[k]}" for k in ("algorithm", "seed", "config_hash", "iterations", "burn_in",
                                      "thin", "retained", "failure")]
    lines.append(f"{'column':<16}{'mean':>24}{'sd':>24}{'mcse(mean)':>24}{'mcse(sd)':>24}")
    for name, st in s["columns"].items():
        lines.append(f"{name:<16}" + "".join(f"{st[k]:>24.17g}" for k in ("mean", "sd", "mcse_mean", "mcse_sd")))
    return "\n".join(lines) + "\n"


# -- diagnose ----------------------------------------------------------------------------

def command_diagnose(args) -> int:
    from mixreg.diagnostics import GridTooSmall, autocorr_compare, default_grid, grid_posterior_oracle

    cfg, data, h, out = _setup(args)
    report, problem = _propriety(data, h)
    if problem:
        log.error(problem)
        return EXIT_FAIL
    seed = cfg.chain.seed
    algos = ["da", "pxda"]
    warnings = []
    if not check_haar_existence(h, data.n, data.d, data.a)["holds"]:
        algos = ["da"]
        warnings.append("Haar PX-DA existence not certified: comparison reduced to DA only")
        log.warning(warnings[-1])
    outputs = {}
    for alg in algos:
        # paired seeds: both chains use the same seed
        outputs[alg] = run_chain(ChainConfig(alg, cfg.chain.iterations, cfg.chain.burn_in,
                                             cfg.chain.thin, seed), data, h)
        if outputs[alg].failure:
            log.error("%s chain failed: %s", alg, outputs[alg].failure)
            return EXIT_FAIL
    result = {"seed": seed, "config_hash": cfg.semantic_hash(), "warnings": warnings}
    ok = True
    if len(outputs) == 2:
        rep = autocorr_compare(outputs["da"], outputs["pxda"], cfg.diagnose.functional,
                               cfg.diagnose.max_lag)
        result["autocorrelation"] = {"functional": cfg.diagnose.functional, **rep.as_dict()}
        ok &= bool(rep.ok.all())
    if data.p == 1 and data.d == 1:
        grid = default_grid(data, cfg.check.grid_points, cfg.check.grid_points,
                            cfg.check.grid_beta_ses, cfg.check.grid_log_sigma_halfwidth)
        post = None
        for _ in range(4):
            try:
                post = grid_posterior_oracle(data, h, grid)
                break
            except GridTooSmall:
                grid = _widen(grid)
        if post is None:
            result["oracle"] = "skipped: grid could not cover the posterior"
            ok = False
        else:
            result["oracle"] = _oracle_agreement(post, outputs)
            ok &= all(abs(z) < 3 for rep in result["oracle"]["chains"].values() for z in rep["z"].values())
    else:
        result["oracle"] = "skipped: oracle requires p=d=1"
    result["ok"] = ok
    _emit(out, "diagnose", result, json.dumps(result, indent=2, default=_json_default) + "\n", cfg)
    print("diagnose: " + ("all checks passed" if ok else "some checks failed"))
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def _widen(grid):
    def w(lohi_n, factor):
        lo, hi, n = lohi_n
        c, half = (lo + hi) / 2, (hi - lo) / 2 * factor
        return (c - half, c + half, int(n * factor))
    return {"beta": w(grid["beta"], 2.0), "log_sigma": w(grid["log_sigma"], 1.5)}


def _oracle_agreement(post, outputs):
    bm, bs = post.beta_mean_sd()
    sm, ss = post.sigma2_mean_sd()
    ref = {"beta_mean": bm, "beta_sd": bs, "sigma2_mean": sm, "sigma2_sd": ss}
    chains = {}
    for alg, o in outputs.items():
        b = summarize(o.beta[:, 0, 0])
        s = summarize(o.sigma[:, 0, 0])
        est = {"beta_mean": (b["mean"], b["mcse_mean"]), "beta_sd": (b["sd"], b["mcse_sd"]),
               "sigma2_mean": (s["mean"], s["mcse_mean"]), "sigma2_sd": (s["sd"], s["mcse_sd"])}
        chains[alg] = {"estimate": {k: v[0] for k, v in est.items()},
                       "mcse": {k: v[1] for k, v in est.items()},
                       "z": {k: (v[0] - ref[k]) / v[1] for k, v in est.items()}}
    return {"reference": ref, "edge_mass": post.edge_mass, "chains": chains}


# -- entry point --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="mixreg", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("check", command_check, "certify propriety and convergence"),
                               ("sample", command_sample, "run a chain and write draws"),
                               ("diagnose", command_diagnose, "compare chains and the grid oracle")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides MIXREG_SEED and config)")
        p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
        if name != "check":
            p.add_argument("--algorithm", choices=("da", "pxda"), default=None)
        if name == "sample":
            p.add_argument("--force", action="store_true",
                           help="sample even without a convergence certificate (never overrides propriety)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError, CommandError) as exc:
        log.error("%s", exc)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
