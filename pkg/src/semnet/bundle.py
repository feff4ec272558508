"""On-disk formats: matrix files, network bundles, JSON/CSV artifacts.

A network bundle is a directory holding one binary matrix file per
agent, a ``manifest.json`` with shapes and sha256 checksums, an optional
``labels.txt`` (one integer per line) and an optional ``truth.json``
describing planted structure. The matrix format is a fixed 16-byte
header (magic ``SEMB``, version, d, n) followed by row-major
little-endian float64 payload, so any language can read it with a
handful of lines.

All writes are atomic (temp file then rename) and all JSON is emitted
through one canonical serializer (sorted keys, fixed layout), which is
what makes repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    AgentEmbeddings,
    ConnectionSheaf,
    Dictionary,
    LearnConfig,
    SparseCodes,
    Threshold,
    TopK,
    parse_edge_rule,
)
from .errors import ChecksumError, FormatError, ManifestMismatch
from .sheaf import EdgeCandidate
from .synthetic import SyntheticNetwork

__all__ = [
    "MATRIX_MAGIC",
    "MATRIX_VERSION",
    "NetworkData",
    "write_matrix",
    "read_matrix",
    "canonical_json",
    "write_json_atomic",
    "write_csv_atomic",
    "write_network",
    "read_network",
    "config_to_json_dict",
    "config_from_json_dict",
    "sheaf_to_json_dict",
    "sheaf_from_json_dict",
    "write_dictionary_artifacts",
    "read_dictionary_artifacts",
]

MATRIX_MAGIC = b"SEMB"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sHIIH")
MANIFEST_VERSION = 1


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_matrix(path: str, M: np.ndarray) -> None:
    """Write a 2-D float64 matrix in the SEMB container."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise FormatError(f"matrix files hold 2-D arrays, got ndim={M.ndim}")
    header = _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, M.shape[0], M.shape[1], 0)
    payload = np.ascontiguousarray(M, dtype="<f8").tobytes()
    _atomic_write_bytes(path, header + payload)


def read_matrix(path: str) -> np.ndarray:
    """Read a SEMB matrix file, validating magic, version, and length."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: shorter than the {_HEADER.size}-byte header")
    magic, version, d, n, _ = _HEADER.unpack_from(blob)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != MATRIX_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * d * n
    if len(blob) != expected:
        raise FormatError(
            f"{path}: file is {len(blob)} bytes, header implies {expected}"
        )
    M = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(d, n)
    return M.astype(np.float64, copy=True)


def _sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    """The one JSON layout used for every artifact."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json_atomic(path: str, obj) -> None:
    _atomic_write_bytes(path, canonical_json(obj).encode("utf-8"))


def write_csv_atomic(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


@dataclass(frozen=True)
class NetworkData:
    """A network bundle loaded back into memory."""

    embeddings: Tuple[AgentEmbeddings, ...]
    agent_names: Tuple[str, ...]
    labels: Optional[np.ndarray]
    families: Optional[Tuple[int, ...]]
    truth: Optional[dict]

    @property
    def num_agents(self) -> int:
        return len(self.embeddings)

    @property
    def d(self) -> int:
        return self.embeddings[0].d

    @property
    def n(self) -> int:
        return self.embeddings[0].n

    def matrices(self):
        return [emb.matrix for emb in self.embeddings]


def write_network(
    dirpath: str,
    network,
    labels: Optional[np.ndarray] = None,
    families: Optional[Sequence[int]] = None,
    agent_names: Optional[Sequence[str]] = None,
    truth: Optional[dict] = None,
) -> None:
    """Write embeddings (and any known structure) as a bundle directory.

    ``network`` is a SyntheticNetwork, a sequence of AgentEmbeddings, or
    a sequence of (d, n) arrays. For a SyntheticNetwork the labels,
    family labels, and a truth record (spec echo plus planted supports)
    are filled in automatically.
    """
    if isinstance(network, SyntheticNetwork):
        mats = network.matrices()
        labels = network.labels if labels is None else labels
        families = (
            tuple(int(f) for f in network.true_families)
            if families is None
            else families
        )
        if truth is None:
            truth = {
                "spec": network.spec.to_json_dict(),
                "families": [int(f) for f in network.true_families],
                "supports": [list(s) for s in network.true_supports],
            }
    else:
        mats = [
            emb.matrix if isinstance(emb, AgentEmbeddings) else np.asarray(emb, dtype=np.float64)
            for emb in network
        ]
    V = len(mats)
    if agent_names is None:
        agent_names = [f"agent_{i:04d}" for i in range(V)]

    os.makedirs(dirpath, exist_ok=True)
    agents = []
    for name, M in zip(agent_names, mats):
        fname = f"{name}.semb"
        fpath = os.path.join(dirpath, fname)
        write_matrix(fpath, M)
        agents.append({"name": name, "file": fname, "sha256": _sha256_file(fpath)})

    manifest = {
        "kind": "network-bundle",
        "format_version": MANIFEST_VERSION,
        "endianness": "little",
        "num_agents": V,
        "d": int(mats[0].shape[0]),
        "n": int(mats[0].shape[1]),
        "agents": agents,
        "labels_file": None,
        "labels_sha256": None,
        "families": list(int(f) for f in families) if families is not None else None,
        "truth_file": None,
    }

    if labels is not None:
        text = "".join(f"{int(y)}\n" for y in np.asarray(labels).ravel())
        _atomic_write_bytes(os.path.join(dirpath, "labels.txt"), text.encode("ascii"))
        manifest["labels_file"] = "labels.txt"
        manifest["labels_sha256"] = _sha256_bytes(text.encode("ascii"))
    if truth is not None:
        write_json_atomic(os.path.join(dirpath, "truth.json"), truth)
        manifest["truth_file"] = "truth.json"

    write_json_atomic(os.path.join(dirpath, "manifest.json"), manifest)


def read_network(dirpath: str) -> NetworkData:
    """Load a bundle, verifying shapes against the manifest and checksums."""
    mpath = os.path.join(dirpath, "manifest.json")
    if not os.path.isfile(mpath):
        raise FormatError(f"{dirpath}: no manifest.json")
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mpath}: invalid JSON ({exc})") from exc
    if manifest.get("kind") != "network-bundle":
        raise FormatError(f"{mpath}: not a network bundle manifest")
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise FormatError(
            f"{mpath}: unsupported format_version {manifest.get('format_version')}"
        )

    d, n = int(manifest["d"]), int(manifest["n"])
    agents = manifest["agents"]
    if len(agents) != int(manifest["num_agents"]):
        raise ManifestMismatch(
            f"manifest lists {len(agents)} agents but declares "
            f"num_agents={manifest['num_agents']}"
        )

    embeddings = []
    names = []
    for i, entry in enumerate(agents):
        fpath = os.path.join(dirpath, entry["file"])
        if not os.path.isfile(fpath):
            raise FormatError(f"{fpath}: missing matrix file")
        if _sha256_file(fpath) != entry["sha256"]:
            raise ChecksumError(f"{fpath}: sha256 mismatch")
        M = read_matrix(fpath)
        if M.shape != (d, n):
            raise ManifestMismatch(
                f"{fpath}: matrix is {M.shape}, manifest declares ({d}, {n})"
            )
        embeddings.append(AgentEmbeddings(agent_id=i, matrix=M))
        names.append(entry["name"])

    labels = None
    if manifest.get("labels_file"):
        lpath = os.path.join(dirpath, manifest["labels_file"])
        with open(lpath, "rb") as fh:
            blob = fh.read()
        if manifest.get("labels_sha256") and _sha256_bytes(blob) != manifest["labels_sha256"]:
            raise ChecksumError(f"{lpath}: sha256 mismatch")
        lines = blob.decode("ascii").split()
        labels = np.array([int(tok) for tok in lines], dtype=np.int64)
        if labels.size != n:
            raise ManifestMismatch(
                f"{lpath}: {labels.size} labels for n={n} columns"
            )
        labels.setflags(write=False)

    truth = None
    if manifest.get("truth_file"):
        with open(os.path.join(dirpath, manifest["truth_file"]), "r", encoding="utf-8") as fh:
            truth = json.load(fh)

    families = manifest.get("families")
    return NetworkData(
        embeddings=tuple(embeddings),
        agent_names=tuple(names),
        labels=labels,
        families=tuple(int(f) for f in families) if families is not None else None,
        truth=truth,
    )


def _edge_rule_to_str(rule) -> str:
    if isinstance(rule, TopK):
        return f"topk:{rule.count}"
    if isinstance(rule, Threshold):
        return f"threshold:{rule.tau}"
    raise TypeError(f"unknown edge rule {rule!r}")


def config_to_json_dict(config: LearnConfig) -> dict:
    budgets = config.budgets
    if isinstance(budgets, np.ndarray):
        budgets = [int(b) for b in budgets]
    elif isinstance(budgets, (list, tuple)):
        budgets = [int(b) for b in budgets]
    return {
        "gamma": config.gamma,
        "rho": config.rho,
        "budgets": budgets,
        "alpha0": config.alpha0,
        "mu": config.mu,
        "max_iters": config.max_iters,
        "eps_abs": config.eps_abs,
        "eps_rel": config.eps_rel,
        "seed": config.seed,
        "edge_rule": _edge_rule_to_str(config.edge_rule),
        "candidate_edges": (
            [list(e) for e in config.candidate_edges]
            if config.candidate_edges is not None
            else None
        ),
    }


def config_from_json_dict(obj: dict) -> LearnConfig:
    obj = dict(obj)
    rule = obj.pop("edge_rule", None)
    if isinstance(rule, str):
        obj["edge_rule"] = parse_edge_rule(rule)
    elif rule is not None:
        obj["edge_rule"] = rule
    cand = obj.pop("candidate_edges", None)
    if cand is not None:
        obj["candidate_edges"] = tuple((int(u), int(v)) for u, v in cand)
    return LearnConfig(**obj)


def sheaf_to_json_dict(sheaf: ConnectionSheaf, config: Optional[LearnConfig] = None) -> dict:
    """Sheaf as JSON: kept edges with maps and losses, plus the full
    scored candidate table (losses only; candidate maps are not kept)."""
    edges = []
    for (u, v) in sheaf.edges:
        raw, norm = sheaf.edge_losses[(u, v)]
        edges.append(
            {
                "u": u,
                "v": v,
                "map": [[float(x) for x in row] for row in sheaf.maps[(u, v)]],
                "raw_loss": raw,
                "norm_loss": norm,
            }
        )
    return {
        "kind": "connection-sheaf",
        "format_version": 1,
        "num_nodes": sheaf.num_nodes,
        "d": sheaf.d,
        "edges": edges,
        "candidates": [
            {
                "u": c.u,
                "v": c.v,
                "raw_loss": c.raw_loss,
                "norm_loss": c.norm_loss,
                "norm_loss_reverse": c.norm_loss_reverse,
            }
            for c in sheaf.candidates
        ],
        "config": config_to_json_dict(config) if config is not None else None,
    }


def sheaf_from_json_dict(obj: dict) -> ConnectionSheaf:
    """Rebuild a sheaf from its JSON form.

    Candidate entries come back without their maps (stored as None);
    the kept edges are fully reconstructed.
    """
    if obj.get("kind") != "connection-sheaf":
        raise FormatError("not a connection-sheaf document")
    edges = []
    maps = {}
    losses = {}
    for e in obj["edges"]:
        u, v = int(e["u"]), int(e["v"])
        edges.append((u, v))
        maps[(u, v)] = np.array(e["map"], dtype=np.float64)
        losses[(u, v)] = (float(e["raw_loss"]), float(e["norm_loss"]))
    candidates = tuple(
        EdgeCandidate(
            u=int(c["u"]),
            v=int(c["v"]),
            map=None,
            raw_loss=float(c["raw_loss"]),
            norm_loss=float(c["norm_loss"]),
            norm_loss_reverse=float(c["norm_loss_reverse"]),
        )
        for c in obj["candidates"]
    )
    return ConnectionSheaf(
        num_nodes=int(obj["num_nodes"]),
        d=int(obj["d"]),
        edges=tuple(edges),
        maps=maps,
        edge_losses=losses,
        candidates=candidates,
    )


def write_dictionary_artifacts(
    dirpath: str,
    D: Dictionary,
    codes: Sequence[SparseCodes],
    report,
    config: LearnConfig,
) -> None:
    """Write dictionary.semb, one codes file per agent, and a JSON index
    carrying budgets, checksums, the convergence report, and the config."""
    os.makedirs(dirpath, exist_ok=True)
    dpath = os.path.join(dirpath, "dictionary.semb")
    write_matrix(dpath, D.atoms)
    entries = []
    for S in codes:
        fname = f"codes_{S.agent_id:04d}.semb"
        fpath = os.path.join(dirpath, fname)
        write_matrix(fpath, S.codes)
        entries.append(
            {
                "agent": S.agent_id,
                "file": fname,
                "budget": S.budget,
                "sha256": _sha256_file(fpath),
            }
        )
    index = {
        "kind": "dictionary-artifacts",
        "format_version": 1,
        "dictionary_file": "dictionary.semb",
        "dictionary_sha256": _sha256_file(dpath),
        "gamma": D.gamma,
        "codes": entries,
        "convergence": report.to_json_dict() if report is not None else None,
        "config": config_to_json_dict(config),
    }
    write_json_atomic(os.path.join(dirpath, "dictionary.json"), index)


def read_dictionary_artifacts(dirpath: str):
    """Load (Dictionary, codes, index dict) written by the function above."""
    ipath = os.path.join(dirpath, "dictionary.json")
    if not os.path.isfile(ipath):
        raise FormatError(f"{dirpath}: no dictionary.json")
    with open(ipath, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    if index.get("kind") != "dictionary-artifacts":
        raise FormatError(f"{ipath}: not a dictionary artifact index")
    dpath = os.path.join(dirpath, index["dictionary_file"])
    if _sha256_file(dpath) != index["dictionary_sha256"]:
        raise ChecksumError(f"{dpath}: sha256 mismatch")
    D = Dictionary(atoms=read_matrix(dpath), gamma=float(index.get("gamma", 0.0)))
    codes = []
    for entry in sorted(index["codes"], key=lambda e: e["agent"]):
        fpath = os.path.join(dirpath, entry["file"])
        if _sha256_file(fpath) != entry["sha256"]:
            raise ChecksumError(f"{fpath}: sha256 mismatch")
        codes.append(
            SparseCodes(
                agent_id=int(entry["agent"]),
                codes=read_matrix(fpath),
                budget=int(entry["budget"]),
            )
        )
    return D, codes, index
