"""Command-line driver: one invocation extracts one bundle.

A run is described either by a JSON spec file (``--spec``) or by flags;
flags override spec-file values. ``--list-models`` prints the registry
and exits. Exit codes: 0 success, 1 usage error, 2 data error (unknown
models, unreadable datasets, malformed specs), 3 numerical failure.
Failures print a one-line JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import (
    BadExtractionSpec,
    DatasetUnavailable,
    DimensionMismatch,
    ModelUnavailable,
    NonFiniteFeatures,
)
from .extract import extract
from .registry import MODEL_REGISTRY, list_model_names
from .spec import ExtractionSpec

__all__ = ["main"]

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


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="embedding-extract",
        description="Extract image embeddings from registered backbones "
        "into a network bundle directory.",
    )
    p.add_argument("--spec", default=None, help="JSON spec file; flags override it")
    p.add_argument("--models", default=None,
                   help="comma-separated registered model names")
    p.add_argument("--dataset", default=None,
                   help="cifar10, synthetic:N, or a path to a .npz file")
    p.add_argument("--data-root", default=None, help="cache directory for datasets")
    p.add_argument("--limit", type=int, default=None,
                   help="keep only the first N samples")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--device", default=None, help="torch device string")
    p.add_argument("--backend", default=None,
                   choices=["auto", "timm", "untrained"])
    p.add_argument("--pretrained", action=argparse.BooleanOptionalAction,
                   default=None, help="load published weights (timm backend)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="bundle output directory")
    p.add_argument("--list-models", action="store_true",
                   help="print the model registry and exit")
    p.add_argument("--verbose", action="store_true")
    return p


_FLAG_FIELDS = (
    "dataset", "data_root", "limit", "batch_size", "device", "backend",
    "pretrained", "seed",
)


def _spec_from_args(args) -> ExtractionSpec:
    base = {}
    if args.spec is not None:
        with open(args.spec, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise BadExtractionSpec(f"{args.spec}: spec must be a JSON object")
    merged = dict(base)
    if args.models is not None:
        merged["models"] = [tok for tok in args.models.split(",") if tok]
    for name in _FLAG_FIELDS:
        val = getattr(args, name)
        if val is not None:
            merged[name] = val
    return ExtractionSpec.from_json_dict(merged)


def _list_models() -> int:
    header = f"{'model':<24} {'family':<14} {'params (M)':>10} {'input':>6} {'d':>5}"
    print(header)
    for name in list_model_names():
        info = MODEL_REGISTRY[name]
        print(
            f"{info.name:<24} {info.family:<14} {info.params_millions:>10.2f} "
            f"{info.input_size:>6} {info.embed_dim:>5}"
        )
    return EXIT_OK


def _emit_error(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


_DATA_ERRORS = (
    BadExtractionSpec, ModelUnavailable, DatasetUnavailable, DimensionMismatch,
    FileNotFoundError, IsADirectoryError, NotADirectoryError,
    json.JSONDecodeError,
)
_NUMERICAL_ERRORS = (NonFiniteFeatures,)


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
    if args.list_models:
        return _list_models()
    if args.out is None:
        return _emit_error(UsageError("--out is required"), EXIT_USAGE)
    try:
        result = extract(_spec_from_args(args), args.out)
    except _NUMERICAL_ERRORS as exc:
        return _emit_error(exc, EXIT_NUMERICAL)
    except _DATA_ERRORS as exc:
        return _emit_error(exc, EXIT_DATA)
    print(json.dumps(
        {
            "out_dir": result.out_dir,
            "num_samples": result.num_samples,
            "d": result.d,
            "models": list(result.models),
            "backend": result.backend,
            "dataset": result.dataset,
        },
        sort_keys=True,
    ))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
