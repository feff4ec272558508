"""Sample sources: CIFAR-10, ``.npz`` archives, and seeded synthetic images.

Whatever the source, samples come back in one fixed order that does not
depend on which models are being extracted, so column j of every agent
matrix in a bundle describes the same image and one label file applies
to all agents.
"""

import os

import numpy as np

from .errors import DatasetUnavailable


def _load_cifar10(root: str):
    try:
        from torchvision.datasets import CIFAR10
    except ImportError as exc:
        raise DatasetUnavailable(
            f"dataset 'cifar10' needs torchvision, which is not installed: {exc}"
        ) from exc
    try:
        ds = CIFAR10(root=root, train=False, download=True)
    except Exception as exc:
        raise DatasetUnavailable(
            f"cifar10 could not be loaded into {root!r} "
            f"(no cached copy and download failed?): {exc}"
        ) from exc
    images = np.asarray(ds.data, dtype=np.uint8)
    labels = np.asarray(ds.targets, dtype=np.int64)
    return images, labels


def _load_npz(path: str):
    if not os.path.isfile(path):
        raise DatasetUnavailable(f"{path}: no such file")
    with np.load(path) as archive:
        missing = [key for key in ("images", "labels") if key not in archive]
        if missing:
            raise DatasetUnavailable(f"{path}: missing arrays {missing}")
        images = archive["images"]
        labels = archive["labels"]
    if images.dtype != np.uint8 or images.ndim != 4 or images.shape[-1] != 3:
        raise DatasetUnavailable(
            f"{path}: images must be (N, H, W, 3) uint8, got "
            f"{images.dtype} {images.shape}"
        )
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise DatasetUnavailable(
            f"{path}: labels must be a 1-D integer array, got "
            f"{labels.dtype} {labels.shape}"
        )
    if labels.shape[0] != images.shape[0]:
        raise DatasetUnavailable(
            f"{path}: {labels.shape[0]} labels for {images.shape[0]} images"
        )
    return images, labels.astype(np.int64)


def _load_synthetic(token: str, seed: int):
    try:
        count = int(token)
    except ValueError as exc:
        raise DatasetUnavailable(
            f"synthetic dataset needs an integer count, got {token!r}"
        ) from exc
    if count < 1:
        raise DatasetUnavailable(f"synthetic count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(count, 32, 32, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=count).astype(np.int64)
    return images, labels


def load_samples(spec):
    """Load ``(images, labels, source)`` for an extraction spec.

    Returns images as (N, H, W, 3) uint8, labels as (N,) int64, and a
    short source description for the manifest. ``spec.limit`` keeps the
    first samples in dataset order.
    """
    name = spec.dataset
    if name == "cifar10":
        images, labels = _load_cifar10(spec.data_root)
        source = "cifar10:test"
    elif name.startswith("synthetic:"):
        images, labels = _load_synthetic(name[len("synthetic:"):], spec.seed)
        source = f"{name}:seed{spec.seed}"
    elif name.endswith(".npz"):
        images, labels = _load_npz(name)
        source = os.path.basename(name)
    else:
        raise DatasetUnavailable(
            f"unknown dataset {name!r}; expected 'cifar10', 'synthetic:N', "
            "or a path to a .npz file"
        )
    if spec.limit is not None:
        if spec.limit > images.shape[0]:
            raise DatasetUnavailable(
                f"limit {spec.limit} exceeds the {images.shape[0]} "
                f"available samples of {source}"
            )
        images = images[: spec.limit]
        labels = labels[: spec.limit]
        source = f"{source}[:{spec.limit}]"
    return images, labels, source
