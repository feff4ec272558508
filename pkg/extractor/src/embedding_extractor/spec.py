"""Extraction run description and its JSON form."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Tuple

from .errors import BadExtractionSpec

BACKENDS = ("auto", "timm", "untrained")


@dataclass(frozen=True)
class ExtractionSpec:
    """What to extract: models, samples, backend, and determinism knobs.

    Parameters
    ----------
    models : tuple of str
        Registered model names; each becomes one bundle agent, in order.
    dataset : str
        ``cifar10`` (test split, cached under ``data_root``), a path to
        a ``.npz`` file with ``images`` (N, H, W, 3) uint8 and
        ``labels`` (N,), or ``synthetic:N`` for N seeded random images.
    data_root : str
        Cache directory for downloadable datasets.
    limit : int, optional
        Keep only the first ``limit`` samples in dataset order.
    batch_size : int
        Samples per forward pass.
    device : str
        torch device string; extraction always runs under ``no_grad``.
    backend : {"auto", "timm", "untrained"}
        ``auto`` picks timm when importable, else the untrained stem.
    pretrained : bool
        Load published weights (timm backend only).
    seed : int
        Seeds the untrained stems and the synthetic dataset.
    """

    models: Tuple[str, ...]
    dataset: str = "cifar10"
    data_root: str = "data"
    limit: Optional[int] = None
    batch_size: int = 64
    device: str = "cpu"
    backend: str = "auto"
    pretrained: bool = True
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.models, str):
            raise BadExtractionSpec(
                "models must be a sequence of names, not a single string"
            )
        try:
            names = tuple(str(m) for m in self.models)
        except TypeError as exc:
            raise BadExtractionSpec(f"models is not a sequence: {exc}") from exc
        object.__setattr__(self, "models", names)
        if not names:
            raise BadExtractionSpec("models must name at least one model")
        seen, dupes = set(), set()
        for name in names:
            (dupes if name in seen else seen).add(name)
        if dupes:
            raise BadExtractionSpec(
                f"duplicate models (agent names must be unique): {sorted(dupes)}"
            )
        if not isinstance(self.dataset, str) or not self.dataset:
            raise BadExtractionSpec("dataset must be a non-empty string")
        if self.limit is not None and (
            not isinstance(self.limit, int) or self.limit < 1
        ):
            raise BadExtractionSpec(f"limit must be a positive int, got {self.limit!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise BadExtractionSpec(
                f"batch_size must be a positive int, got {self.batch_size!r}"
            )
        if not isinstance(self.device, str) or not self.device:
            raise BadExtractionSpec("device must be a non-empty string")
        if self.backend not in BACKENDS:
            raise BadExtractionSpec(
                f"backend must be one of {BACKENDS}, got {self.backend!r}"
            )
        if not isinstance(self.pretrained, bool):
            raise BadExtractionSpec("pretrained must be a bool")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise BadExtractionSpec(f"seed must be an int, got {self.seed!r}")

    def to_json_dict(self) -> dict:
        return {
            "models": list(self.models),
            "dataset": self.dataset,
            "data_root": self.data_root,
            "limit": self.limit,
            "batch_size": self.batch_size,
            "device": self.device,
            "backend": self.backend,
            "pretrained": self.pretrained,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExtractionSpec":
        if not isinstance(obj, dict):
            raise BadExtractionSpec("spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise BadExtractionSpec(f"unknown spec keys: {unknown}")
        if "models" not in obj:
            raise BadExtractionSpec("spec is missing the 'models' key")
        return cls(**obj)
