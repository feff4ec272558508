"""Batched feature extraction into one network bundle."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch

from . import backends, bundle_io, data
from .errors import BadExtractionSpec, DimensionMismatch, NonFiniteFeatures
from .registry import model_info
from .spec import ExtractionSpec

TOOL_NAME = "embedding-extractor"
TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class ExtractionResult:
    """Where the bundle landed and what went into it."""

    out_dir: str
    num_samples: int
    d: int
    models: Tuple[str, ...]
    backend: str
    dataset: str


def _resolve_device(device: str) -> torch.device:
    try:
        dev = torch.device(device)
    except RuntimeError as exc:
        raise BadExtractionSpec(f"bad device {device!r}: {exc}") from exc
    if dev.type == "cuda" and not torch.cuda.is_available():
        raise BadExtractionSpec("device 'cuda' requested but CUDA is not available")
    return dev


def extract_features(
    model: torch.nn.Module,
    images: np.ndarray,
    info,
    batch_size: int,
    device: torch.device,
) -> np.ndarray:
    """Run one model over all samples; returns features as (d, n).

    Raises
    ------
    DimensionMismatch
        If the model emits features of a width other than the
        registered ``info.embed_dim``.
    NonFiniteFeatures
        If any emitted value is NaN or infinite.
    """
    model = model.to(device)
    chunks = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            batch = backends.preprocess(
                images[start : start + batch_size], info.input_size
            )
            feats = model(batch.to(device))
            if feats.ndim != 2 or feats.shape[1] != info.embed_dim:
                raise DimensionMismatch(
                    f"{info.name}: features have shape {tuple(feats.shape)}, "
                    f"expected (batch, {info.embed_dim})"
                )
            chunks.append(feats.detach().cpu().to(torch.float64).numpy())
    F = np.concatenate(chunks, axis=0)
    if not np.isfinite(F).all():
        raise NonFiniteFeatures(f"{info.name}: non-finite feature values emitted")
    return np.ascontiguousarray(F.T)


def extract(spec: ExtractionSpec, out_dir: str) -> ExtractionResult:
    """Extract every model in the spec over one shared sample set.

    The dataset is loaded once and fed to every model in the same
    order, so column j of every matrix in the bundle describes the same
    image and the single label file applies to all agents. Agents are
    named after their models; family labels are integer codes into the
    alphabetically sorted family names, which the manifest records.
    """
    infos = [model_info(name) for name in spec.models]
    backend = backends.resolve_backend(spec.backend)
    device = _resolve_device(spec.device)
    images, labels, source = data.load_samples(spec)

    matrices = []
    for info in infos:
        model = backends.load_model(info, backend, spec.pretrained, spec.seed)
        matrices.append(
            extract_features(model, images, info, spec.batch_size, device)
        )

    family_names = sorted({info.family for info in infos})
    code_of = {fam: code for code, fam in enumerate(family_names)}
    families = [code_of[info.family] for info in infos]
    extraction = {
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "backend": backend,
        "pretrained": spec.pretrained,
        "layer": "pre_head_pooled",
        "pooling": (
            "backbone default" if backend == "timm" else "mean over patch tokens"
        ),
        "dataset": source,
        "seed": spec.seed,
        "preprocessing": {
            "scale": "1/255",
            "resize": "bilinear to each model's square input size",
            "normalize_mean": list(backends.IMAGENET_MEAN),
            "normalize_std": list(backends.IMAGENET_STD),
        },
        "family_names": family_names,
        "models": [
            {
                "name": info.name,
                "family": info.family,
                "family_code": code_of[info.family],
                "params_millions": info.params_millions,
                "input_size": info.input_size,
            }
            for info in infos
        ],
    }
    bundle_io.write_bundle(
        out_dir,
        [info.name for info in infos],
        matrices,
        labels,
        families=families,
        extraction=extraction,
    )
    return ExtractionResult(
        out_dir=str(out_dir),
        num_samples=int(labels.shape[0]),
        d=int(infos[0].embed_dim),
        models=tuple(spec.models),
        backend=backend,
        dataset=source,
    )
