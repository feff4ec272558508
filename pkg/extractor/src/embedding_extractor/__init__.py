"""Batched image-embedding extraction into network bundles.

A registry of small vision backbones, all exposing 384-dimensional
pre-head features, is run over one shared image set; the per-model
embedding matrices land in a network-bundle directory (one binary
matrix per agent, a shared label file, and a checksummed manifest) that
downstream dictionary and topology tooling consumes. Pretrained weights
come from timm when it is installed; a seeded untrained fallback keeps
the pipeline runnable and testable offline.
"""

from .errors import (
    BadExtractionSpec,
    DatasetUnavailable,
    DimensionMismatch,
    ExtractorError,
    ModelUnavailable,
    NonFiniteFeatures,
)
from .extract import TOOL_VERSION, ExtractionResult, extract
from .registry import (
    EMBED_DIM,
    MODEL_REGISTRY,
    ModelInfo,
    list_model_names,
    model_info,
)
from .spec import ExtractionSpec

__version__ = TOOL_VERSION

__all__ = [
    "BadExtractionSpec",
    "DatasetUnavailable",
    "DimensionMismatch",
    "EMBED_DIM",
    "ExtractionResult",
    "ExtractionSpec",
    "ExtractorError",
    "MODEL_REGISTRY",
    "ModelInfo",
    "ModelUnavailable",
    "NonFiniteFeatures",
    "extract",
    "list_model_names",
    "model_info",
]
