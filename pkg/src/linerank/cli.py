"""Command-line interface.

Subcommands: parse (validate a case, optionally dump model matrices),
rank (score lines from sampled or simulated injections), ground-truth
(reference probabilities), experiment (false-selection or rank-interval
study). Options may come from a key=value config file via --config;
explicit flags win over the file. Every run can write a manifest JSON
recording the resolved configuration, library versions, seeds, kernel
backend, and any covariance ridge, which is enough to reproduce the
output byte for byte.

Exit codes: 0 success, 2 usage (bad flag values, empty algorithm list,
out-of-range k:j pairs, missing case file), 3 bad data (parse or
validation failures), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .case_io import load_case
from .dc_model import DCModel, build_dc_model, dump_matrix
from .errors import CaseFormatError, DataError, NetworkError, NumericError, UsageError
from .experiments import (
    DEFAULT_N_GRID,
    DEFAULT_REPLICATIONS,
    analytic_gaussian_truth,
    collect_ranks,
    false_selection,
    laplace_ldp_truth,
    monte_carlo_truth,
    rank_intervals,
    read_ground_truth_csv,
    write_false_selection_csv,
    write_ground_truth_csv,
    write_rank_intervals_csv,
)
from .ranking import Algorithm, rank_lines, write_scores_csv
from .ratefn import BACKEND
from .stochastic import (
    default_gaussian_model,
    default_laplace_model,
    read_samples_csv,
    write_samples_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DUMPABLE = {
    "incidence": lambda m: m.incidence,
    "susceptance": lambda m: m.susceptance,
    "laplacian": lambda m: m.laplacian,
    "pinv": lambda m: m.laplacian_pinv,
    "ptdf": lambda m: m.ptdf,
    "nominal": lambda m: m.nominal_flow * m.case.base_mva,  # MW
}


def _as_int(name: str, value, minimum: int | None = None) -> int:
    try:
        v = int(str(value))
    except ValueError:
        raise UsageError(f"--{name} expects an integer, got {value!r}") from None
    if minimum is not None and v < minimum:
        raise UsageError(f"--{name} must be at least {minimum}, got {v}")
    return v


def _as_float(name: str, value, positive: bool = False) -> float:
    try:
        v = float(str(value))
    except ValueError:
        raise UsageError(f"--{name} expects a number, got {value!r}") from None
    if positive and not v > 0:
        raise UsageError(f"--{name} must be positive, got {v}")
    return v


def _read_config(path: str) -> dict[str, str]:
    """Parse a key=value config file; blank lines and # comments allowed."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _merge_config(args: argparse.Namespace, defaults: dict) -> None:
    """Fill argparse None values from the config file, then hard defaults."""
    config = _read_config(args.config) if args.config else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, hard in defaults.items():
        if getattr(args, key) is not None:
            continue
        if key in config:
            setattr(args, key, config[key])
        else:
            setattr(args, key, hard)


def _parse_algs(spec) -> list[Algorithm]:
    tokens = [tok for tok in str(spec).split(",") if tok.strip()]
    if not tokens:
        raise UsageError("empty algorithm list")
    try:
        algs = [Algorithm.parse(tok) for tok in tokens]
    except DataError as exc:
        raise UsageError(str(exc)) from None
    if len(set(algs)) != len(algs):
        raise UsageError(f"duplicate algorithms in {spec!r}")
    return algs


def _parse_grid(spec) -> tuple[int, ...]:
    if isinstance(spec, tuple):
        return spec
    try:
        grid = tuple(int(tok) for tok in str(spec).split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"bad sample-size grid {spec!r}") from None
    if not grid or min(grid) < 1:
        raise UsageError(f"sample sizes must be positive integers, got {spec!r}")
    return grid


def _parse_pairs(spec: str, m: int) -> list[tuple[int, int]]:
    pairs = []
    for tok in str(spec).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" not in tok:
            raise UsageError(f"bad k:j pair {tok!r}, expected like 1:3")
        k_str, j_str = tok.split(":", 1)
        try:
            k, j = int(k_str), int(j_str)
        except ValueError:
            raise UsageError(f"bad k:j pair {tok!r}, expected integers") from None
        if not 1 <= k <= j <= m:
            raise UsageError(f"need 1 <= k <= j <= {m} lines, got {tok!r}")
        pairs.append((k, j))
    if not pairs:
        raise UsageError("no k:j pairs given")
    return pairs


def _resolve_dist(value: str) -> str:
    if value not in ("gaussian", "laplace"):
        raise UsageError(f"--dist must be gaussian or laplace, got {value!r}")
    return value


def _gamma_from_mult(model: DCModel, gamma_mult) -> np.ndarray | None:
    """Optional synthetic limits: a multiple of each line's |nominal flow|."""
    if gamma_mult in (None, ""):
        return None
    c = _as_float("gamma-mult", gamma_mult, positive=True)
    return c * np.abs(model.nominal_flow)


def _load_case_or_exit(path: str):
    if not path:
        raise UsageError("--case is required")
    p = Path(path)
    if not p.exists():
        print(f"error: case file not found: {p}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return load_case(p)


def _write_manifest(path: str | None, command: str, case_path: str, config: dict) -> None:
    if not path:
        return
    manifest = {
        "command": command,
        "case": case_path,
        "config": config,
        "backend": BACKEND,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "linerank": __version__,
        },
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cmd_parse(args: argparse.Namespace) -> int:
    case = _load_case_or_exit(args.case)
    model = build_dc_model(case)
    print(
        f"{case.name}: {case.n_buses} buses ({model.n_stochastic} stochastic), "
        f"{case.n_branches} branches, base {case.base_mva} MVA"
    )
    if args.dump:
        text = dump_matrix(_DUMPABLE[args.dump](model))
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


_RANK_DEFAULTS = {
    "algs": "1,2,3,4",
    "dist": "gaussian",
    "n": "1000",
    "seed": "0",
    "epsilon": "1.0",
    "confidence": "0.95",
    "variance_factor": "5.0",
    "offdiag_variance": "25.0",
    "gamma_mult": "",
    "samples": "",
    "save_samples": "",
    "out": "scores.csv",
}


def _cmd_rank(args: argparse.Namespace) -> int:
    _merge_config(args, _RANK_DEFAULTS)
    case = _load_case_or_exit(args.case)
    model = build_dc_model(case)
    algs = _parse_algs(args.algs)
    seed = _as_int("seed", args.seed)
    n = _as_int("n", args.n, minimum=1)
    gamma = _gamma_from_mult(model, args.gamma_mult)
    ridge = 0.0

    if args.samples:
        samples_mw = read_samples_csv(args.samples)
        samples = samples_mw / case.base_mva
        n = samples.shape[0]
    else:
        dist = _resolve_dist(args.dist)
        if dist == "gaussian":
            injections, ridge = default_gaussian_model(
                model, seed,
                _as_float("variance-factor", args.variance_factor, positive=True),
                _as_float("offdiag-variance", args.offdiag_variance),
            )
        else:
            injections = default_laplace_model(
                model,
                _as_float("epsilon", args.epsilon, positive=True),
                _as_float("variance-factor", args.variance_factor, positive=True),
            )
        samples = injections.sample(n, seed)
        if args.save_samples:
            write_samples_csv(args.save_samples, samples * case.base_mva)

    confidence = _as_float("confidence", args.confidence)
    if not 0.0 < confidence < 1.0:
        raise UsageError(f"--confidence must be in (0, 1), got {confidence}")
    tables = rank_lines(
        model, samples, algs, gamma=gamma,
        epsilon=_as_float("epsilon", args.epsilon, positive=True),
        confidence=confidence,
    )
    write_scores_csv(args.out, tables)
    config = {k: getattr(args, k) for k in _RANK_DEFAULTS}
    config["resolved_n"] = n
    config["ridge"] = ridge
    _write_manifest(args.manifest, "rank", args.case, config)
    print(f"wrote {args.out}: {len(tables)} table(s), {model.n_branches} lines, n={n}")
    return EXIT_OK


_TRUTH_DEFAULTS = {
    "source": "analytic_gaussian",
    "seed": "0",
    "n_total": "10000000",
    "epsilon": "1.0",
    "dist": "",
    "variance_factor": "5.0",
    "offdiag_variance": "25.0",
    "gamma_mult": "",
    "out": "ground_truth.csv",
}


def _cmd_ground_truth(args: argparse.Namespace) -> int:
    _merge_config(args, _TRUTH_DEFAULTS)
    case = _load_case_or_exit(args.case)
    model = build_dc_model(case)
    seed = _as_int("seed", args.seed)
    gamma = _gamma_from_mult(model, args.gamma_mult)
    variance_factor = _as_float("variance-factor", args.variance_factor, positive=True)
    offdiag = _as_float("offdiag-variance", args.offdiag_variance)
    epsilon = _as_float("epsilon", args.epsilon, positive=True)
    ridge = 0.0

    if args.source == "analytic_gaussian":
        injections, ridge = default_gaussian_model(model, seed, variance_factor, offdiag)
        truth = analytic_gaussian_truth(model, injections, gamma)
    elif args.source == "laplace_ldp_perfect":
        injections = default_laplace_model(model, epsilon, variance_factor)
        truth = laplace_ldp_truth(model, injections, gamma)
    elif args.source == "monte_carlo":
        dist = _resolve_dist(args.dist or "gaussian")
        if dist == "gaussian":
            injections, ridge = default_gaussian_model(model, seed, variance_factor, offdiag)
        else:
            injections = default_laplace_model(model, epsilon, variance_factor)
        truth, _, _ = monte_carlo_truth(
            model, injections,
            _as_int("n-total", args.n_total, minimum=1), seed,
            gamma=gamma,
        )
    else:
        raise UsageError(f"unknown ground-truth source {args.source!r}")

    write_ground_truth_csv(args.out, truth)
    config = {k: getattr(args, k) for k in _TRUTH_DEFAULTS}
    config["ridge"] = ridge
    _write_manifest(args.manifest, "ground-truth", args.case, config)
    print(f"wrote {args.out}: source={truth.source}")
    return EXIT_OK


_EXPERIMENT_DEFAULTS = {
    "kind": "false_selection",
    "algs": "1,2,3,4",
    "dist": "gaussian",
    "n_grid": ",".join(str(n) for n in DEFAULT_N_GRID),
    "replications": str(DEFAULT_REPLICATIONS),
    "seed": "0",
    "epsilon": "1.0",
    "pairs": "1:1",
    "coverage": "0.95",
    "truth": "",
    "truth_source": "",
    "variance_factor": "5.0",
    "offdiag_variance": "25.0",
    "gamma_mult": "",
    "workers": "",
    "out": "",
}


def _cmd_experiment(args: argparse.Namespace) -> int:
    _merge_config(args, _EXPERIMENT_DEFAULTS)
    case = _load_case_or_exit(args.case)
    model = build_dc_model(case)
    algs = _parse_algs(args.algs)
    seed = _as_int("seed", args.seed)
    epsilon = _as_float("epsilon", args.epsilon, positive=True)
    gamma = _gamma_from_mult(model, args.gamma_mult)
    variance_factor = _as_float("variance-factor", args.variance_factor, positive=True)
    offdiag = _as_float("offdiag-variance", args.offdiag_variance)
    ridge = 0.0

    dist = _resolve_dist(args.dist)
    if dist == "gaussian":
        injections, ridge = default_gaussian_model(model, seed, variance_factor, offdiag)
        default_truth = "analytic_gaussian"
    else:
        injections = default_laplace_model(model, epsilon, variance_factor)
        default_truth = "laplace_ldp_perfect"

    if args.truth:
        truth = read_ground_truth_csv(args.truth)
        if truth.lines.shape[0] != model.n_branches:
            raise DataError(
                f"ground truth has {truth.lines.shape[0]} lines, case has "
                f"{model.n_branches}"
            )
    else:
        source = args.truth_source or default_truth
        if source == "analytic_gaussian":
            if dist != "gaussian":
                raise UsageError("analytic_gaussian truth needs --dist gaussian")
            truth = analytic_gaussian_truth(model, injections, gamma)
        elif source == "laplace_ldp_perfect":
            if dist != "laplace":
                raise UsageError("laplace_ldp_perfect truth needs --dist laplace")
            truth = laplace_ldp_truth(model, injections, gamma)
        elif source == "monte_carlo":
            truth, _, _ = monte_carlo_truth(model, injections, 10_000_000, seed, gamma=gamma)
        else:
            raise UsageError(f"unknown ground-truth source {source!r}")

    collection = collect_ranks(
        model, injections, algs,
        n_grid=_parse_grid(args.n_grid),
        replications=_as_int("replications", args.replications, minimum=1),
        seed=seed,
        gamma=gamma,
        epsilon=epsilon,
        workers=_as_int("workers", args.workers, minimum=1) if args.workers else None,
    )

    out = args.out or f"{args.kind}.csv"
    if args.kind == "false_selection":
        rows = false_selection(
            collection, truth, _parse_pairs(args.pairs, model.n_branches)
        )
        write_false_selection_csv(out, rows)
    elif args.kind == "rank_intervals":
        coverage = _as_float("coverage", args.coverage)
        if not 0.0 < coverage < 1.0:
            raise UsageError(f"--coverage must be in (0, 1), got {coverage}")
        rows = rank_intervals(collection, truth, coverage)
        write_rank_intervals_csv(out, rows)
    else:
        raise UsageError(f"unknown experiment kind {args.kind!r}")

    config = {k: getattr(args, k) for k in _EXPERIMENT_DEFAULTS}
    config["truth_source_used"] = truth.source
    config["ridge"] = ridge
    _write_manifest(args.manifest, "experiment", args.case, config)
    print(f"wrote {out}: {len(rows)} rows ({args.kind}, {collection.replications} reps)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linerank",
        description="Rank transmission lines by overload probability from sampled injections.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="validate a case file, optionally dump model matrices")
    p.add_argument("--case", required=True, help="MATPOWER .m case file")
    p.add_argument("--dump", choices=sorted(_DUMPABLE), help="matrix to dump as row,col,value CSV")
    p.add_argument("--out", help="write the dump here instead of stdout")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("rank", help="score and rank lines from samples")
    p.add_argument("--case", required=True, help="MATPOWER .m case file")
    p.add_argument("--config", help="key=value file supplying defaults for any option")
    p.add_argument("--algs", help="comma list from 1,2,3,4 (default all)")
    p.add_argument("--samples", help="read injections (MW) from this t,p_1..p_d CSV")
    p.add_argument("--dist", help="simulate injections: gaussian or laplace (default gaussian)")
    p.add_argument("--n", help="samples to simulate (default 1000)")
    p.add_argument("--seed", help="random seed (default 0)")
    p.add_argument("--epsilon", help="noise scale for the laplace estimator (default 1.0)")
    p.add_argument("--confidence", help="counting-interval confidence (default 0.95)")
    p.add_argument("--variance-factor", dest="variance_factor", help="MW^2 variance per MW set point (default 5)")
    p.add_argument("--offdiag-variance", dest="offdiag_variance", help="coupling variance MW^2 (default 25)")
    p.add_argument("--gamma-mult", dest="gamma_mult", help="override limits with mult * |nominal flow|")
    p.add_argument("--save-samples", dest="save_samples", help="also write simulated samples (MW) here")
    p.add_argument("--out", help="scores CSV path (default scores.csv)")
    p.add_argument("--manifest", help="write a reproducibility manifest JSON here")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("ground-truth", help="reference overload probabilities")
    p.add_argument("--case", required=True, help="MATPOWER .m case file")
    p.add_argument("--config")
    p.add_argument("--source", choices=["analytic_gaussian", "laplace_ldp_perfect", "monte_carlo"])
    p.add_argument("--dist", help="sampling distribution for monte_carlo (default gaussian)")
    p.add_argument("--n-total", dest="n_total", help="monte carlo sample count (default 1e7)")
    p.add_argument("--seed")
    p.add_argument("--epsilon")
    p.add_argument("--variance-factor", dest="variance_factor")
    p.add_argument("--offdiag-variance", dest="offdiag_variance")
    p.add_argument("--gamma-mult", dest="gamma_mult")
    p.add_argument("--out", help="ground truth CSV path (default ground_truth.csv)")
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_ground_truth)

    p = sub.add_parser("experiment", help="false-selection or rank-interval study")
    p.add_argument("--case", required=True, help="MATPOWER .m case file")
    p.add_argument("--config")
    p.add_argument("--kind", choices=["false_selection", "rank_intervals"])
    p.add_argument("--algs")
    p.add_argument("--dist", help="gaussian or laplace (default gaussian)")
    p.add_argument("--n-grid", dest="n_grid", help="comma list of sample sizes")
    p.add_argument("--replications")
    p.add_argument("--seed")
    p.add_argument("--epsilon")
    p.add_argument("--pairs", help="comma list of k:j pairs (default 1:1)")
    p.add_argument("--coverage", help="rank-interval coverage (default 0.95)")
    p.add_argument("--truth", help="read ground truth from this CSV")
    p.add_argument("--truth-source", dest="truth_source",
                   choices=["analytic_gaussian", "laplace_ldp_perfect", "monte_carlo"])
    p.add_argument("--variance-factor", dest="variance_factor")
    p.add_argument("--offdiag-variance", dest="offdiag_variance")
    p.add_argument("--gamma-mult", dest="gamma_mult")
    p.add_argument("--workers", help="thread count (default: cpu count, capped at 32)")
    p.add_argument("--out", help="output CSV (default <kind>.csv)")
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CaseFormatError, NetworkError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
