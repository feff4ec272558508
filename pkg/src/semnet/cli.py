"""Command-line pipeline driver.

Subcommands mirror the experiment flow: ``gen`` draws a synthetic
network bundle, ``dict-learn`` fits the shared dictionary and per-agent
sparse codes, ``sheaf-learn`` fits and selects edge maps (optionally on
raw embeddings via ``--baseline``), ``analyze`` emits signatures,
accuracy, edge-loss statistics, and topology quality (with an optional
budget sweep), and ``pipeline`` chains all stages into one directory.

Exit codes: 0 success, 1 usage error, 2 data error (malformed files or
inconsistent inputs), 3 numerical failure. Failures print a one-line
JSON object to stderr. Every artifact embeds the resolved configuration
that produced it, and reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import analysis as _analysis
from . import bundle as _bundle
from .core import LearnConfig, parse_edge_rule, validate_network
from .dictionary import learn_dictionary
from .errors import (
    BadBudget,
    BadSpec,
    ChecksumError,
    DimensionMismatch,
    FormatError,
    ManifestMismatch,
    NonFiniteData,
    SingularGramian,
    UnknownEdge,
    ZeroReference,
)
from .sheaf import learn_sheaf
from .synthetic import SyntheticSpec, generate

__all__ = ["main", "run_gen", "run_dict_learn", "run_sheaf_learn", "run_analyze", "run_pipeline"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    """Bad flags or flag values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; route through UsageError
    # instead so usage problems get exit code 1 and a JSON error line.
    def error(self, message):
        raise UsageError(message)


def _parse_budget_list(text: str):
    try:
        return tuple(int(tok) for tok in text.split(",") if tok != "")
    except ValueError as exc:
        raise UsageError(f"bad budget list {text!r}: {exc}") from exc


def _parse_sweep(text: str):
    if not text.startswith("budget="):
        raise UsageError(f"unsupported sweep {text!r}; expected budget=a,b,c")
    values = _parse_budget_list(text[len("budget="):])
    if not values:
        raise UsageError("sweep needs at least one budget value")
    return values


_LEARN_FLAG_FIELDS = (
    "gamma", "rho", "alpha0", "mu", "max_iters", "eps_abs", "eps_rel", "seed",
)


def _add_learn_flags(p: argparse.ArgumentParser, with_edge_rule: bool = True):
    p.add_argument("--config", default=None, help="JSON config file; flags override its values")
    p.add_argument("--gamma", type=float, default=None, help="log-det regularization weight")
    p.add_argument("--rho", type=float, default=None, help="augmented Lagrangian penalty")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--budget", type=int, default=None, help="uniform per-agent row budget d'")
    g.add_argument("--budgets", type=_parse_budget_list, default=None,
                   help="comma-separated per-agent row budgets")
    p.add_argument("--alpha0", type=float, default=None, help="initial smoothing stepsize")
    p.add_argument("--mu", type=float, default=None, help="stepsize decay rate")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--eps-abs", type=float, default=None)
    p.add_argument("--eps-rel", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    if with_edge_rule:
        p.add_argument("--edge-rule", default=None,
                       help="edge selection: threshold:TAU or topk:COUNT")


def _config_from_args(args) -> LearnConfig:
    base = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise BadSpec(f"{args.config}: config must be a JSON object")
    merged = dict(base)
    for name in _LEARN_FLAG_FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    if getattr(args, "budget", None) is not None:
        merged["budgets"] = args.budget
    if getattr(args, "budgets", None) is not None:
        merged["budgets"] = list(args.budgets)
    rule = getattr(args, "edge_rule", None)
    if rule is not None:
        merged["edge_rule"] = rule
    try:
        return _bundle.config_from_json_dict(merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


# ---------------------------------------------------------------------------
# Stage implementations (importable; the CLI wrappers only shuffle args).


def run_gen(spec: SyntheticSpec, out_dir: str):
    network = generate(spec)
    _bundle.write_network(out_dir, network)
    logger.info("wrote bundle with %d agents to %s", network.num_agents, out_dir)
    return network


def run_dict_learn(bundle_dir: str, out_dir: str, config: LearnConfig):
    data = _bundle.read_network(bundle_dir)
    X = validate_network(list(data.embeddings))
    D, codes, report = learn_dictionary(X, config)
    _bundle.write_dictionary_artifacts(out_dir, D, codes, report, config)
    logger.info(
        "dictionary learned in %d iterations (converged=%s)",
        report.iterations, report.converged,
    )
    return D, codes, report


def run_sheaf_learn(
    bundle_dir: str,
    dict_dir,
    out_file: str,
    config: LearnConfig,
    baseline: bool = False,
):
    data = _bundle.read_network(bundle_dir)
    if baseline:
        reps = data.matrices()
    else:
        if dict_dir is None:
            raise UsageError("sheaf-learn needs --dict DIR unless --baseline is set")
        D, codes, _ = _bundle.read_dictionary_artifacts(dict_dir)
        if len(codes) != data.num_agents:
            raise DimensionMismatch(
                f"dictionary artifacts cover {len(codes)} agents, bundle has {data.num_agents}"
            )
        reps = [D.atoms @ S.codes for S in codes]
    sheaf = learn_sheaf(reps, config)
    doc = _bundle.sheaf_to_json_dict(sheaf, config)
    doc["baseline"] = baseline
    _bundle.write_json_atomic(out_file, doc)
    logger.info("sheaf with %d edges written to %s", sheaf.num_edges, out_file)
    return sheaf


def _analysis_sections(data, D, codes, sheaf, config, train_fraction):
    signatures = [_analysis.semantic_signature(S) for S in codes]
    sim = _analysis.signature_similarity(signatures)
    train_idx, test_idx = _analysis.split_columns(data.n, config.seed, train_fraction)

    sections = {
        "signatures": [
            {"agent": sig.agent_id, "values": [float(x) for x in sig.values]}
            for sig in signatures
        ],
        "similarity": {
            "matrix": [[float(x) for x in row] for row in sim.matrix],
            "zero_pairs": [list(p) for p in sim.zero_pairs],
        },
        "accuracy": None,
        "edge_stats": None,
        "topology": None,
    }
    if data.labels is not None:
        acc = _analysis.average_accuracy(
            sheaf, D, codes, data.labels, train_idx, test_idx
        )
        sections["accuracy"] = acc.to_json_dict()
    if data.families is not None:
        fam = np.array(data.families)
        stats = _analysis.edge_loss_stats(sheaf.candidates, fam)
        sections["edge_stats"] = stats.to_json_dict()
        sections["topology"] = _analysis.topology_quality(sheaf, fam).to_json_dict()
        sections["_histogram_rows"] = stats.histogram_rows()
    return sections


def run_analyze(
    bundle_dir: str,
    dict_dir: str,
    sheaf_file: str,
    out_dir: str,
    config: LearnConfig,
    sweep=None,
    train_fraction: float = 0.8,
):
    data = _bundle.read_network(bundle_dir)
    D, codes, _ = _bundle.read_dictionary_artifacts(dict_dir)
    with open(sheaf_file, "r", encoding="utf-8") as fh:
        sheaf = _bundle.sheaf_from_json_dict(json.load(fh))

    os.makedirs(out_dir, exist_ok=True)
    sections = _analysis_sections(data, D, codes, sheaf, config, train_fraction)
    hist_rows = sections.pop("_histogram_rows", None)

    doc = {
        "kind": "analysis-report",
        "format_version": 1,
        "config": _bundle.config_to_json_dict(config),
        "train_fraction": train_fraction,
        **sections,
    }
    _bundle.write_json_atomic(os.path.join(out_dir, "analysis.json"), doc)
    if hist_rows is not None:
        _bundle.write_csv_atomic(
            os.path.join(out_dir, "edge_loss_histogram.csv"),
            ("bin_left", "bin_right", "count", "class"),
            hist_rows,
        )

    if sweep:
        rows = _run_budget_sweep(data, config, sweep, train_fraction)
        _bundle.write_csv_atomic(
            os.path.join(out_dir, "sweep.csv"),
            ("budget", "agent", "accuracy", "self_accuracy", "num_edges"),
            rows,
        )
    return doc


def _run_budget_sweep(data, config: LearnConfig, budgets, train_fraction: float):
    """Relearn dictionary, codes, and sheaf at each budget; tidy rows out.

    Labels are required since the sweep reports the accuracy proxy.
    """
    if data.labels is None:
        raise BadSpec("budget sweep needs a labels file in the bundle")
    X = validate_network(list(data.embeddings))
    train_idx, test_idx = _analysis.split_columns(data.n, config.seed, train_fraction)
    rows = []
    for budget in budgets:
        cfg = LearnConfig(
            gamma=config.gamma, rho=config.rho, budgets=int(budget),
            alpha0=config.alpha0, mu=config.mu, max_iters=config.max_iters,
            eps_abs=config.eps_abs, eps_rel=config.eps_rel, seed=config.seed,
            edge_rule=config.edge_rule, candidate_edges=config.candidate_edges,
        )
        D, codes, _ = learn_dictionary(X, cfg)
        sheaf = learn_sheaf([D.atoms @ S.codes for S in codes], cfg)
        acc = _analysis.average_accuracy(
            sheaf, D, codes, data.labels, train_idx, test_idx
        )
        for agent, value in enumerate(acc.per_agent):
            rows.append(
                (
                    int(budget),
                    agent,
                    "" if value is None else value,
                    acc.self_accuracy[agent],
                    sheaf.num_edges,
                )
            )
    return rows


def run_pipeline(
    spec: SyntheticSpec,
    out_dir: str,
    config: LearnConfig,
    baseline_compare: bool = True,
    train_fraction: float = 0.8,
    sweep=None,
):
    os.makedirs(out_dir, exist_ok=True)
    bundle_dir = os.path.join(out_dir, "bundle")
    dict_dir = os.path.join(out_dir, "dict")
    sheaf_file = os.path.join(out_dir, "sheaf.json")
    analysis_dir = os.path.join(out_dir, "analysis")

    run_gen(spec, bundle_dir)
    run_dict_learn(bundle_dir, dict_dir, config)
    run_sheaf_learn(bundle_dir, dict_dir, sheaf_file, config, baseline=False)
    artifacts = ["bundle", "dict", "sheaf.json", "analysis/analysis.json"]
    if baseline_compare:
        baseline_file = os.path.join(out_dir, "sheaf_baseline.json")
        run_sheaf_learn(bundle_dir, None, baseline_file, config, baseline=True)
        artifacts.append("sheaf_baseline.json")
    run_analyze(
        bundle_dir, dict_dir, sheaf_file, analysis_dir, config,
        sweep=sweep, train_fraction=train_fraction,
    )

    report = {
        "kind": "pipeline-report",
        "format_version": 1,
        "spec": spec.to_json_dict(),
        "config": _bundle.config_to_json_dict(config),
        "train_fraction": train_fraction,
        "sweep": list(sweep) if sweep else None,
        "artifacts": sorted(artifacts),
        "seeds": {"spec": spec.seed, "config": config.seed},
    }
    _bundle.write_json_atomic(os.path.join(out_dir, "pipeline.json"), report)
    return report


# ---------------------------------------------------------------------------
# Argument wiring.


def _cmd_gen(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if args.seed is not None:
        obj["seed"] = args.seed
    spec = SyntheticSpec.from_json_dict(obj)
    run_gen(spec, args.out)
    return EXIT_OK


def _cmd_dict_learn(args) -> int:
    config = _config_from_args(args)
    run_dict_learn(args.bundle, args.out, config)
    return EXIT_OK


def _cmd_sheaf_learn(args) -> int:
    config = _config_from_args(args)
    run_sheaf_learn(args.bundle, args.dict, args.out, config, baseline=args.baseline)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    config = _config_from_args(args)
    run_analyze(
        args.bundle, args.dict, args.sheaf, args.out, config,
        sweep=args.sweep, train_fraction=args.train_fraction,
    )
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    spec = SyntheticSpec.from_json_dict(obj)
    config = _config_from_args(args)
    run_pipeline(
        spec, args.out, config,
        baseline_compare=not args.no_baseline,
        train_fraction=args.train_fraction,
        sweep=args.sweep,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="semnet",
        description="Dictionary, sparse codes, and sheaf topology over embedding networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic network bundle")
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True, help="bundle directory to create")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("dict-learn", help="fit dictionary and sparse codes on a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    _add_learn_flags(p, with_edge_rule=False)
    p.set_defaults(func=_cmd_dict_learn)

    p = sub.add_parser("sheaf-learn", help="fit and select edge maps")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dict", default=None, help="dictionary artifact directory")
    p.add_argument("--out", required=True, help="sheaf JSON file")
    p.add_argument("--baseline", action="store_true",
                   help="align raw embeddings instead of denoised ones")
    _add_learn_flags(p)
    p.set_defaults(func=_cmd_sheaf_learn)

    p = sub.add_parser("analyze", help="emit signatures, accuracy, and edge statistics")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--sheaf", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--sweep", type=_parse_sweep, default=None,
                   help="budget=a,b,c relearns at each budget and emits sweep.csv")
    p.add_argument("--train-fraction", type=float, default=0.8)
    _add_learn_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("pipeline", help="run gen, dict-learn, sheaf-learn, analyze")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-baseline", action="store_true",
                   help="skip the raw-embedding comparison sheaf")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--sweep", type=_parse_sweep, default=None)
    _add_learn_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def _emit_error(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


_DATA_ERRORS = (
    FormatError, ChecksumError, ManifestMismatch, BadSpec, DimensionMismatch,
    NonFiniteData, UnknownEdge, ZeroReference, FileNotFoundError,
    IsADirectoryError, NotADirectoryError, json.JSONDecodeError,
)
_NUMERICAL_ERRORS = (SingularGramian, np.linalg.LinAlgError, FloatingPointError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _emit_error(exc, EXIT_USAGE)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "func", None) is None:
        return _emit_error(UsageError("a subcommand is required"), EXIT_USAGE)
    try:
        return args.func(args)
    except (UsageError, BadBudget) as exc:
        return _emit_error(exc, EXIT_USAGE)
    except _NUMERICAL_ERRORS as exc:
        return _emit_error(exc, EXIT_NUMERICAL)
    except _DATA_ERRORS as exc:
        return _emit_error(exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
