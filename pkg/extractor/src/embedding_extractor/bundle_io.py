"""Writer for the network-bundle directory format.

A bundle is a directory with one matrix file per agent, a
``labels.txt`` (one integer per line), and a ``manifest.json`` carrying
shapes and sha256 checksums. A matrix file is a 16-byte header (magic
``SEMB``, uint16 version 1, uint32 rows d, uint32 columns n, reserved
uint16, all little-endian) followed by the row-major little-endian
float64 payload. JSON is serialized canonically (sorted keys, 2-space
indent, trailing newline) and every file is written atomically, so a
rerun that produces the same numbers produces the same bytes.

This module only writes the format; reading bundles back is the
consumer's side of the interface.
"""

import hashlib
import json
import os
import struct
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch

MATRIX_MAGIC = b"SEMB"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sHIIH")
MANIFEST_VERSION = 1


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def canonical_json(obj) -> str:
    """The one JSON layout used for every artifact."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def matrix_bytes(M: np.ndarray) -> bytes:
    """Serialize a 2-D float64 matrix into the SEMB container."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch(f"matrix files hold 2-D arrays, got ndim={M.ndim}")
    header = _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, M.shape[0], M.shape[1], 0)
    return header + np.ascontiguousarray(M, dtype="<f8").tobytes()


def write_bundle(
    dirpath: str,
    agent_names: Sequence[str],
    matrices: Sequence[np.ndarray],
    labels: np.ndarray,
    families: Optional[Sequence[int]] = None,
    extraction: Optional[dict] = None,
) -> None:
    """Write one (d, n) matrix per agent plus labels and a manifest.

    All matrices must share one shape and ``labels`` must hold one
    integer per column. ``families`` attaches an integer group label
    per agent; ``extraction`` is embedded verbatim in the manifest as
    provenance and ignored by readers that do not know it.
    """
    if len(agent_names) != len(matrices):
        raise DimensionMismatch(
            f"{len(agent_names)} agent names for {len(matrices)} matrices"
        )
    mats = [np.asarray(M, dtype=np.float64) for M in matrices]
    d, n = mats[0].shape
    for name, M in zip(agent_names, mats):
        if M.shape != (d, n):
            raise DimensionMismatch(
                f"{name}: matrix is {M.shape}, expected ({d}, {n})"
            )
    labels = np.asarray(labels).ravel()
    if labels.shape[0] != n:
        raise DimensionMismatch(f"{labels.shape[0]} labels for n={n} columns")
    if families is not None and len(families) != len(agent_names):
        raise DimensionMismatch(
            f"{len(families)} family labels for {len(agent_names)} agents"
        )

    os.makedirs(dirpath, exist_ok=True)
    agents = []
    for name, M in zip(agent_names, mats):
        blob = matrix_bytes(M)
        fname = f"{name}.semb"
        _atomic_write_bytes(os.path.join(dirpath, fname), blob)
        agents.append(
            {"name": name, "file": fname, "sha256": hashlib.sha256(blob).hexdigest()}
        )

    text = "".join(f"{int(y)}\n" for y in labels).encode("ascii")
    _atomic_write_bytes(os.path.join(dirpath, "labels.txt"), text)

    manifest = {
        "kind": "network-bundle",
        "format_version": MANIFEST_VERSION,
        "endianness": "little",
        "num_agents": len(agents),
        "d": int(d),
        "n": int(n),
        "agents": agents,
        "labels_file": "labels.txt",
        "labels_sha256": hashlib.sha256(text).hexdigest(),
        "families": [int(f) for f in families] if families is not None else None,
        "truth_file": None,
    }
    if extraction is not None:
        manifest["extraction"] = extraction
    _atomic_write_bytes(
        os.path.join(dirpath, "manifest.json"),
        canonical_json(manifest).encode("utf-8"),
    )
