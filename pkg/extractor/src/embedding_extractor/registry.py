"""The reference set of vision backbones this tool extracts from.

Every entry names a small image classifier whose standard checkpoint
exposes 384-dimensional features at the final layer before the
classification head, so embeddings from any subset of them are
comparable column for column. ``params_millions`` is the size of the
standard configuration. ``input_size`` is the square resolution the
checkpoint was trained at (the trailing number of the name where
present, otherwise 224). ``patch_size`` sets the token resolution of
the untrained fallback stem and mirrors each architecture's stem
stride; the timm backend ignores it.
"""

from dataclasses import dataclass
from typing import Dict, Tuple

from .errors import ModelUnavailable

EMBED_DIM = 384


@dataclass(frozen=True)
class ModelInfo:
    """Static description of one extractable backbone."""

    name: str
    family: str
    params_millions: float
    input_size: int
    patch_size: int
    embed_dim: int = EMBED_DIM


_TABLE = (
    ModelInfo("vit_small_patch16_224", "ViT", 22.05, 224, 16),
    ModelInfo("vit_small_patch16_384", "ViT", 22.20, 384, 16),
    ModelInfo("vit_small_patch32_224", "ViT", 22.88, 224, 32),
    ModelInfo("vit_small_patch32_384", "ViT", 22.92, 384, 32),
    ModelInfo("levit_128", "LeViT", 9.21, 224, 16),
    ModelInfo("levit_conv_128", "LeViT", 9.21, 224, 16),
    ModelInfo("levit_192", "LeViT", 10.95, 224, 16),
    ModelInfo("efficientvit_m4", "EfficientViT", 8.80, 224, 16),
    ModelInfo("volo_d1_224", "Volo", 26.63, 224, 8),
    ModelInfo("volo_d1_384", "Volo", 26.78, 384, 8),
)

MODEL_REGISTRY: Dict[str, ModelInfo] = {info.name: info for info in _TABLE}


def list_model_names() -> Tuple[str, ...]:
    """Registered model names, in registry order."""
    return tuple(info.name for info in _TABLE)


def model_info(name: str) -> ModelInfo:
    """Look up one registry entry.

    Raises
    ------
    ModelUnavailable
        If ``name`` is not registered.
    """
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        known = ", ".join(list_model_names())
        raise ModelUnavailable(
            f"unknown model {name!r}; known models: {known}"
        ) from None
