"""Model construction: pretrained backbones via timm, or seeded stems.

The timm backend builds each registered model with its classification
head removed, so a forward pass returns the pooled features of the
final pre-head layer. The untrained backend exists so the whole
pipeline (preprocessing, batched inference, bundle writing) can run and
be tested on machines without timm or network access: it is a
patch-projection stem with fixed Gaussian weights drawn from a
per-model seed. Untrained features carry no semantic content; which
backend produced a bundle is recorded in its manifest.
"""

import hashlib
import importlib.util
import math

import numpy as np
import torch

from .errors import BadExtractionSpec, ModelUnavailable
from .registry import ModelInfo

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def resolve_backend(requested: str) -> str:
    """Map ``auto`` to the best importable backend name."""
    if requested == "timm":
        if importlib.util.find_spec("timm") is None:
            raise ModelUnavailable(
                "backend 'timm' requested but timm is not installed"
            )
        return "timm"
    if requested == "untrained":
        return "untrained"
    if requested == "auto":
        return "timm" if importlib.util.find_spec("timm") else "untrained"
    raise BadExtractionSpec(f"unknown backend {requested!r}")


def _stable_seed(name: str, seed: int) -> int:
    # Hash-based so the draw is stable across processes and platforms.
    digest = hashlib.sha256(f"{name}:{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


class PatchProjectionStem(torch.nn.Module):
    """Untrained feature extractor with one fixed Gaussian projection.

    Images are cut into non-overlapping ``patch_size`` squares, each
    patch vector is projected to ``embed_dim``, passed through GELU,
    and the patch tokens are mean-pooled into one feature vector.
    """

    def __init__(self, info: ModelInfo, seed: int):
        super().__init__()
        gen = torch.Generator().manual_seed(_stable_seed(info.name, seed))
        fan_in = 3 * info.patch_size**2
        weight = torch.randn(fan_in, info.embed_dim, generator=gen)
        self.register_buffer("weight", weight / math.sqrt(fan_in))
        self.patch_size = info.patch_size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # (B, 3, S, S) -> (B, L, 3 p^2) with L = (S / p)^2 patch tokens
        patches = torch.nn.functional.unfold(
            x, kernel_size=self.patch_size, stride=self.patch_size
        ).transpose(1, 2)
        tokens = torch.nn.functional.gelu(patches @ self.weight)
        return tokens.mean(dim=1)


def load_model(
    info: ModelInfo, backend: str, pretrained: bool, seed: int
) -> torch.nn.Module:
    """Build one feature extractor mapping (B, 3, S, S) to (B, d).

    Raises
    ------
    ModelUnavailable
        If timm cannot build the model, or pretrained weights are
        requested on the untrained backend.
    """
    if backend == "timm":
        import timm

        try:
            # num_classes=0 strips the head; forward returns pooled
            # pre-head features.
            model = timm.create_model(info.name, pretrained=pretrained, num_classes=0)
        except Exception as exc:
            raise ModelUnavailable(
                f"timm could not build {info.name!r}: {exc}"
            ) from exc
        return model.eval()
    if pretrained:
        raise ModelUnavailable(
            f"{info.name}: pretrained weights need the timm backend; "
            "install timm or set pretrained to false"
        )
    return PatchProjectionStem(info, seed).eval()


def preprocess(images: np.ndarray, input_size: int) -> torch.Tensor:
    """uint8 (B, H, W, 3) images to normalized float (B, 3, S, S).

    Scales to [0, 1], resizes bilinearly to the model's square input,
    and applies the standard ImageNet channel statistics. One shared
    recipe keeps agents comparable; the manifest records it.
    """
    x = torch.from_numpy(np.ascontiguousarray(images)).to(torch.float32) / 255.0
    x = x.permute(0, 3, 1, 2)
    if x.shape[-2:] != (input_size, input_size):
        x = torch.nn.functional.interpolate(
            x, size=(input_size, input_size), mode="bilinear", align_corners=False
        )
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (x - mean) / std
