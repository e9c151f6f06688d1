"""Command-line interface: ``laplace-learn {generate,estimate,benchmark,validate}``.

Options can also come from an INI file given with ``--config``; each
subcommand reads its own section, with keys spelled like the long flags
(``max-cycles`` or ``max_cycles``).  A flag given on the command line wins
over the file.  The ``LAPLACE_LEARN_SEED`` environment variable overrides a
seed from the file but not ``--seed``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 no
convergence (partial results are still written).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .cgl import estimate_cgl
from .core import (
    ConnectivityMask,
    LaplaceLearnError,
    LaplacianClass,
    NumericalError,
    RegularizationMatrix,
    StatisticMatrix,
    ValidationError,
    build_k,
    build_statistic,
    kkt_report,
    validate_class,
)
from .evaluation import DEFAULT_K_OVER_N, Method, alpha_grid, f_score, relative_error, run_benchmark
from .ggl import EstimatorConfig, estimate_ggl
from .io import read_matrix, write_json, write_matrix
from .synthetic import GraphSpec, generate_graph, sample_gmrf, trial_rng

logger = logging.getLogger("laplace_learn")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 1, 2, 3

DEFAULTS = {
    "generate": {
        "topology": "grid",
        "n": 64,
        "p": 0.1,
        "p1": 0.1,
        "p2": 0.3,
        "modules": 4,
        "laplacian_class": "ddgl",
        "k": None,
        "k_over_n": 30.0,
        "seed": 0,
        "out": ".",
    },
    "estimate": {
        "problem": "ggl",
        "statistic": None,
        "data": None,
        "statistic_mode": "gaussian",
        "k": None,
        "mask": "full",
        "reg": "l1",
        "h_file": None,
        "alpha": 0.0,
        "alpha_grid": False,
        "ground_truth": None,
        "epsilon": 1e-4,
        "max_cycles": 1000,
        "seed": 0,
        "out": ".",
    },
    "benchmark": {
        "topology": "grid",
        "n": 64,
        "p": 0.1,
        "p1": 0.1,
        "p2": 0.3,
        "modules": 4,
        "laplacian_class": "ddgl",
        "k_over_n": ",".join(f"{v:g}" for v in DEFAULT_K_OVER_N),
        "methods": "GGL(A),GGL",
        "mask_mismatch": "",
        "alpha": "grid",
        "trials": 10,
        "seed": 0,
        "jobs": 1,
        "epsilon": 1e-4,
        "max_cycles": 1000,
        "out": ".",
    },
    "validate": {
        "theta": None,
        "laplacian_class": None,
        "statistic": None,
        "mask": "full",
        "alpha": 0.0,
        "reg": "l1",
        "tol": 1e-9,
        "kkt_tol": 1e-6,
    },
}

BOOLEAN_KEYS = {"alpha_grid"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _spec_flags(p):
    p.add_argument("--topology", choices=["grid", "er", "modular"], default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=float, default=None, help="edge probability (er)")
    p.add_argument("--p1", type=float, default=None, help="across-module probability (modular)")
    p.add_argument("--p2", type=float, default=None, help="within-module probability (modular)")
    p.add_argument("--modules", type=int, default=None)
    p.add_argument(
        "--class",
        dest="laplacian_class",
        choices=["ddgl", "cgl", "DDGL", "CGL"],
        default=None,
        help="ddgl: uniform vertex weights; cgl: zero vertex weights",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="laplace-learn", description="Learn graph Laplacian matrices from data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with one section per subcommand")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    parser.add_argument("--backend", choices=sorted(kernels.BACKENDS), help="kernel implementation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="draw a ground-truth graph and samples")
    _spec_flags(g)
    g.add_argument("--k", type=int, default=None, help="number of samples (default k/n times n)")
    g.add_argument("--k-over-n", type=float, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="output directory")

    e = sub.add_parser("estimate", help="estimate a Laplacian from a statistic or data")
    e.add_argument("--problem", choices=["ggl", "ddgl", "cgl", "GGL", "DDGL", "CGL"], default=None)
    e.add_argument("--statistic", help="CSV file with S")
    e.add_argument("--data", help="CSV data file (samples in rows; vertices in rows for binary mode)")
    e.add_argument("--statistic-mode", choices=["gaussian", "binary"], default=None)
    e.add_argument("--k", type=int, default=None, help="sample count when --statistic is given")
    e.add_argument("--mask", default=None, help="CSV mask file or 'full'")
    e.add_argument("--reg", choices=["l1", "l1-off", "custom"], default=None)
    e.add_argument("--h-file", default=None, help="CSV file with H for --reg custom")
    e.add_argument("--alpha", type=float, default=None)
    e.add_argument("--alpha-grid", action="store_const", const=True, default=None, help="sweep the 15-point grid")
    e.add_argument("--ground-truth", default=None, help="CSV with the true Laplacian for RE/FS")
    e.add_argument("--epsilon", type=float, default=None)
    e.add_argument("--max-cycles", type=int, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", default=None)

    b = sub.add_parser("benchmark", help="Monte-Carlo accuracy study")
    _spec_flags(b)
    b.add_argument("--k-over-n", default=None, help="comma-separated list")
    b.add_argument("--methods", default=None, help="comma-separated, e.g. GGL(A),GGL,DDGL(A)")
    b.add_argument("--mask-mismatch", default=None, help="comma-separated swap fractions, e.g. 0.05,0.25")
    b.add_argument("--alpha", default=None, help="fixed regularization weight, or 'grid' for the best-RE sweep")
    b.add_argument("--trials", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--jobs", type=int, default=None)
    b.add_argument("--epsilon", type=float, default=None)
    b.add_argument("--max-cycles", type=int, default=None)
    b.add_argument("--out", default=None)

    v = sub.add_parser("validate", help="check class membership and optimality")
    v.add_argument("--theta", default=None, help="CSV file with the matrix to check")
    v.add_argument("--class", dest="laplacian_class", choices=["ggl", "ddgl", "cgl", "GGL", "DDGL", "CGL"], default=None)
    v.add_argument("--statistic", default=None, help="CSV with S; enables the optimality check")
    v.add_argument("--mask", default=None)
    v.add_argument("--alpha", type=float, default=None)
    v.add_argument("--reg", choices=["l1", "l1-off"], default=None)
    v.add_argument("--tol", type=float, default=None)
    v.add_argument("--kkt-tol", type=float, default=None)
    return parser


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def resolve(args, config_path=None) -> dict:
    """Merge defaults, the config file section and flags (flags win)."""
    cmd = args.command
    defaults = DEFAULTS[cmd]
    values = {}
    file_values = {}
    if config_path:
        cp = configparser.ConfigParser()
        if not cp.read(config_path):
            raise ValidationError(f"cannot read config file {config_path}")
        if cp.has_section(cmd):
            for key, raw in cp.items(cmd):
                dest = key.replace("-", "_")
                if dest == "class":
                    dest = "laplacian_class"
                if dest not in defaults:
                    raise ValidationError(f"unknown key {key!r} in section [{cmd}]")
                dflt = defaults[dest]
                if dest in BOOLEAN_KEYS:
                    dflt = False
                file_values[dest] = _coerce(raw, dflt if dflt is not None else "")
    env_seed = os.environ.get("LAPLACE_LEARN_SEED")
    if env_seed is not None and "seed" in defaults:
        if "seed" in file_values:
            logger.info("LAPLACE_LEARN_SEED=%s overrides seed %s from the config file", env_seed, file_values["seed"])
        try:
            file_values["seed"] = int(env_seed)
        except ValueError:
            raise ValidationError(f"LAPLACE_LEARN_SEED must be an integer, got {env_seed!r}") from None
    for dest, dflt in defaults.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            if dest in file_values and file_values[dest] != flag:
                logger.warning("--%s=%s overrides %s from the config file", dest.replace("_", "-"), flag, file_values[dest])
            values[dest] = flag
        elif dest in file_values:
            values[dest] = file_values[dest]
        else:
            values[dest] = dflt
    return values


def _spec_from(v) -> GraphSpec:
    cls = str(v["laplacian_class"]).lower()
    if cls not in ("ddgl", "cgl"):
        raise ValidationError("--class must be ddgl or cgl for generated graphs")
    return GraphSpec(
        topology=v["topology"],
        n=int(v["n"]),
        p=float(v["p"]),
        p1=float(v["p1"]),
        p2=float(v["p2"]),
        modules=int(v["modules"]),
        vertex_weights="uniform" if cls == "ddgl" else "zero",
        seed=int(v["seed"]),
    )


def cmd_generate(v) -> int:
    spec = _spec_from(v)
    k = v["k"] if v["k"] is not None else int(round(float(v["k_over_n"]) * spec.n))
    if k < 1:
        raise ValidationError("sample count must be positive")
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(v["seed"])
    lap, mask = generate_graph(spec, trial_rng(seed, 0, 0))
    x = sample_gmrf(lap, k, trial_rng(seed, 0, 1))
    write_matrix(out / "laplacian.csv", lap.theta)
    write_matrix(out / "mask.csv", mask.entries)
    write_matrix(out / "data.csv", x)
    write_json(
        out / "meta.json",
        {"version": __version__, "seed": seed, "spec": spec.as_dict(), "class": lap.kind.value, "k": k, "n": spec.n},
    )
    logger.info("wrote %s graph with %d edges and %d samples to %s", spec.label(), mask.edge_count, k, out)
    return EXIT_OK


def _load_statistic(v):
    if v["statistic"] and v["data"]:
        raise ValidationError("give either --statistic or --data, not both")
    if v["statistic"]:
        s = StatisticMatrix(read_matrix(v["statistic"]), v["k"])
        return s, v["k"]
    if v["data"]:
        s = build_statistic(read_matrix(v["data"]), v["statistic_mode"])
        return s, s.sample_count
    raise ValidationError("one of --statistic or --data is required")


def _load_mask(spec, n):
    if spec is None or spec == "full":
        return ConnectivityMask.full(n)
    return ConnectivityMask(np.rint(read_matrix(spec)).astype(np.int8))


def _regularization(v, n, alpha):
    if v["reg"] == "custom":
        if not v.get("h_file"):
            raise ValidationError("--reg custom needs --h-file")
        return RegularizationMatrix(read_matrix(v["h_file"]))
    return RegularizationMatrix.standard(v["reg"], n, alpha)


def _run_estimator(problem, s, mask, h, cfg):
    if problem is LaplacianClass.CGL:
        return estimate_cgl(s, mask, h, cfg)
    return estimate_ggl(s, mask, h, cfg)


def _result_entry(res, problem, k_mat, mask, alpha, truth):
    rep = kkt_report(res.theta, k_mat, mask, problem)
    entry = {
        "alpha": alpha,
        "objective": res.objective,
        "converged": res.converged,
        "cycles": res.cycles,
        "refine_sweeps": res.refine_sweeps,
        "criterion": res.criterion,
        "objective_trace": res.objective_trace,
        "kkt": rep.as_dict(),
        "seconds": res.elapsed,
    }
    if truth is not None:
        entry["relative_error"] = relative_error(res.theta.theta, truth)
        entry["f_score"] = f_score(res.theta.theta, truth)
    return entry


def cmd_estimate(v) -> int:
    problem = LaplacianClass.parse(v["problem"])
    s, k = _load_statistic(v)
    mask = _load_mask(v["mask"], s.n)
    truth = read_matrix(v["ground_truth"]) if v["ground_truth"] else None
    cfg = EstimatorConfig(
        target_class=problem.value if problem is not LaplacianClass.CGL else "GGL",
        epsilon=float(v["epsilon"]),
        max_cycles=int(v["max_cycles"]),
    )
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    if v["alpha_grid"]:
        if v["reg"] == "custom":
            raise ValidationError("--alpha-grid needs a standard regularization form")
        if not k:
            raise ValidationError("--alpha-grid needs the sample count (--k or --data)")
        alphas = alpha_grid(s, k)
    else:
        alphas = [float(v["alpha"])]
    entries, results = [], []
    for i, alpha in enumerate(alphas):
        h = _regularization(v, s.n, alpha)
        res = _run_estimator(problem, s, mask, h, cfg)
        entries.append(_result_entry(res, problem, build_k(s, h), mask, alpha, truth))
        results.append(res)
        if len(alphas) > 1:
            write_matrix(out / f"theta_alpha{i:02d}.csv", res.theta.theta)
    if len(alphas) == 1:
        chosen = 0
    elif truth is not None:
        chosen = int(np.argmin([e["relative_error"] for e in entries]))
    else:
        chosen = None
        logger.warning("no --ground-truth: per-alpha estimates written, no selection made")
    report = {
        "version": __version__,
        "seed": int(v["seed"]),
        "problem": problem.value,
        "backend": kernels.backend_name(),
        "config": {key: val for key, val in v.items()},
        "results": entries,
        "selected": chosen,
    }
    if chosen is not None:
        write_matrix(out / "theta.csv", results[chosen].theta.theta)
        write_matrix(out / "c.csv", results[chosen].c)
    write_json(out / "report.json", report)
    if chosen is not None and not results[chosen].converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_benchmark(v) -> int:
    spec = _spec_from(v)
    trials = int(v["trials"])
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    k_over_n = [float(t) for t in str(v["k_over_n"]).split(",") if t.strip()]
    methods = [Method.parse(t) for t in _split_methods(str(v["methods"]))]
    fractions = [float(t) for t in str(v["mask_mismatch"]).split(",") if t.strip()]
    for problem in dict.fromkeys(m.problem for m in methods):
        for f in fractions:
            methods.append(Method(problem, "perturbed", f))
    alpha = None if str(v["alpha"]).strip().lower() == "grid" else float(v["alpha"])
    cfg = EstimatorConfig(epsilon=float(v["epsilon"]), max_cycles=int(v["max_cycles"]))
    out = Path(v["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = run_benchmark(spec, k_over_n, methods, trials, int(v["seed"]), int(v["jobs"]), cfg, alpha)
    report.to_csv(out / "trials.csv")
    report.curve_csv(out / "curve.csv")
    payload = json.loads(report.to_json())
    payload["seconds"] = time.perf_counter() - t0
    write_json(out / "aggregate.json", payload)
    for c in report.aggregate():
        print(f"{c.spec}\t{c.method}\tk/n={c.k_over_n:g}\tRE={c.mean_re:.4f}\tFS={c.mean_fs:.4f}\tfailed={c.failures}")
    return EXIT_OK


def _split_methods(text):
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur)
    return [p for p in (q.strip() for q in parts) if p]


def cmd_validate(v) -> int:
    if not v["theta"]:
        raise ValidationError("--theta is required")
    theta = read_matrix(v["theta"])
    verdict = validate_class(theta, float(v["tol"]))
    out = {
        "class": verdict.kind.value if verdict.kind else None,
        "sign_violation": verdict.sign_violation,
        "psd_violation": verdict.psd_violation,
        "dominance_violation": verdict.dominance_violation,
        "rowsum_violation": verdict.rowsum_violation,
    }
    ok = True
    if v["laplacian_class"]:
        target = LaplacianClass.parse(v["laplacian_class"])
        out["requested"] = target.value
        out["class_ok"] = verdict.satisfies(target)
        ok = out["class_ok"]
        if v["statistic"]:
            s = StatisticMatrix(read_matrix(v["statistic"]))
            mask = _load_mask(v["mask"], s.n)
            h = RegularizationMatrix.standard(v["reg"], s.n, float(v["alpha"]))
            rep = kkt_report(theta, build_k(s, h), mask, target)
            out["kkt"] = rep.as_dict()
            out["kkt_ok"] = rep.passed(float(v["kkt_tol"]))
            ok = ok and out["kkt_ok"]
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_INVALID


COMMANDS = {"generate": cmd_generate, "estimate": cmd_estimate, "benchmark": cmd_benchmark, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        parser.error(f"unknown log level {args.log_level!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.backend:
        kernels.set_backend(args.backend)
    try:
        values = resolve(args, args.config)
        return COMMANDS[args.command](values)
    except NumericalError as exc:
        _report_error(exc)
        return EXIT_NUMERICAL
    except (LaplaceLearnError, OSError, ValueError) as exc:
        _report_error(exc)
        return EXIT_INVALID


def _report_error(exc) -> None:
    print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
