"""Evaluation artifacts for a learned dictionary/sheaf pair.

Four views of a trained network are produced here: per-agent semantic
signatures (row norms of the codes), their pairwise cosine similarity,
a nearest-class-centroid accuracy proxy for representations exchanged
along sheaf edges, and distributional statistics of the candidate edge
losses split by family (homophilic vs heterophilic), including an
adjusted Rand index between recovered components and true families.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import ConnectionSheaf, SparseCodes, reconstruct
from .errors import DimensionMismatch

__all__ = [
    "SemanticSignature",
    "SignatureSimilarity",
    "AccuracyReport",
    "EdgeLossStats",
    "TopologyReport",
    "semantic_signature",
    "signature_similarity",
    "split_columns",
    "average_accuracy",
    "edge_loss_stats",
    "adjusted_rand_index",
    "topology_quality",
]


@dataclass(frozen=True)
class SemanticSignature:
    """Row-norm profile of one agent's codes: which atoms it uses, how hard."""

    agent_id: int
    values: np.ndarray


def semantic_signature(S: SparseCodes) -> SemanticSignature:
    """Euclidean norm of every row of the agent's code matrix."""
    values = np.linalg.norm(S.codes, axis=1)
    values.setflags(write=False)
    return SemanticSignature(agent_id=S.agent_id, values=values)


@dataclass(frozen=True)
class SignatureSimilarity:
    """Pairwise cosine similarity of signatures.

    Pairs involving an all-zero signature carry similarity 0 and are
    listed in ``zero_pairs`` rather than raising.
    """

    matrix: np.ndarray
    zero_pairs: Tuple[Tuple[int, int], ...]


def signature_similarity(signatures: Sequence[SemanticSignature]) -> SignatureSimilarity:
    """Cosine similarity of every signature pair (including self-pairs)."""
    vecs = [np.asarray(s.values, dtype=np.float64) for s in signatures]
    V = len(vecs)
    length = vecs[0].shape[0] if V else 0
    for i, v in enumerate(vecs):
        if v.shape != (length,):
            raise DimensionMismatch(
                f"signature {i} has shape {v.shape}, expected ({length},)"
            )
    norms = np.array([np.linalg.norm(v) for v in vecs])
    sim = np.zeros((V, V))
    zero_pairs = []
    for i in range(V):
        for j in range(i, V):
            if norms[i] == 0.0 or norms[j] == 0.0:
                zero_pairs.append((i, j))
                continue
            sim[i, j] = sim[j, i] = float(vecs[i] @ vecs[j] / (norms[i] * norms[j]))
    sim.setflags(write=False)
    return SignatureSimilarity(matrix=sim, zero_pairs=tuple(zero_pairs))


def split_columns(n: int, seed: int, train_fraction: float = 0.8):
    """Deterministic train/test split of column indices.

    A seeded permutation is cut at ``floor(train_fraction * n)``; both
    sides are returned sorted.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(np.floor(train_fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def _fit_centroids(R_train: np.ndarray, y_train: np.ndarray):
    """Per-class mean columns; classes absent from training are skipped."""
    present = np.unique(y_train)
    centroids = np.stack([R_train[:, y_train == c].mean(axis=1) for c in present])
    return present, centroids


def _classify(R: np.ndarray, present: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(R.T**2, axis=1, keepdims=True)
        - 2.0 * R.T @ centroids.T
        + np.sum(centroids**2, axis=1)
    )
    return present[np.argmin(d2, axis=1)]


@dataclass(frozen=True)
class AccuracyReport:
    """Nearest-centroid accuracy of representations received over edges.

    ``per_agent[v]`` averages, over v's neighbors u, the accuracy of v's
    own centroid classifier on u's test representations after alignment
    into v's basis; it is None for isolated agents. ``self_accuracy`` is
    the same classifier on v's own test columns.
    """

    per_agent: Tuple[Optional[float], ...]
    self_accuracy: Tuple[float, ...]
    neighbor_sets: Tuple[Tuple[int, ...], ...]
    num_test: int

    @property
    def mean_over_agents(self) -> Optional[float]:
        vals = [a for a in self.per_agent if a is not None]
        return float(np.mean(vals)) if vals else None

    def to_json_dict(self) -> dict:
        return {
            "per_agent": list(self.per_agent),
            "self_accuracy": list(self.self_accuracy),
            "neighbor_sets": [list(s) for s in self.neighbor_sets],
            "num_test": self.num_test,
            "mean_over_agents": self.mean_over_agents,
        }


def _align_into(sheaf: ConnectionSheaf, sender: int, receiver: int, R: np.ndarray):
    """Carry sender-basis columns into the receiver's basis along an edge."""
    if (sender, receiver) in sheaf.maps:
        return sheaf.maps[(sender, receiver)] @ R
    # Stored maps point low index -> high index; the reverse direction
    # inverts by transpose since the maps are orthogonal.
    return sheaf.maps[(receiver, sender)].T @ R


def average_accuracy(
    sheaf: ConnectionSheaf,
    D,
    codes: Sequence[SparseCodes],
    labels: np.ndarray,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
) -> AccuracyReport:
    """Score each agent on what its neighbors send it.

    For agent v, a centroid per class is fit on v's own denoised
    training columns D @ S_v. Each neighbor u's denoised test columns
    are aligned into v's basis via the connecting edge map and
    classified; ``per_agent[v]`` is the mean accuracy over neighbors.
    """
    labels = np.asarray(labels).ravel()
    reps = [reconstruct(D, S) for S in codes]
    if len(reps) != sheaf.num_nodes:
        raise DimensionMismatch(
            f"{len(reps)} code sets for a sheaf on {sheaf.num_nodes} nodes"
        )
    y_train, y_test = labels[train_idx], labels[test_idx]

    classifiers = []
    self_acc = []
    for v in range(sheaf.num_nodes):
        present, centroids = _fit_centroids(reps[v][:, train_idx], y_train)
        classifiers.append((present, centroids))
        pred = _classify(reps[v][:, test_idx], present, centroids)
        self_acc.append(float(np.mean(pred == y_test)))

    per_agent = []
    neighbor_sets = []
    for v in range(sheaf.num_nodes):
        neigh = sheaf.neighbors(v)
        neighbor_sets.append(tuple(neigh))
        if not neigh:
            per_agent.append(None)
            continue
        present, centroids = classifiers[v]
        accs = []
        for u in neigh:
            received = _align_into(sheaf, u, v, reps[u][:, test_idx])
            pred = _classify(received, present, centroids)
            accs.append(float(np.mean(pred == y_test)))
        per_agent.append(float(np.mean(accs)))

    return AccuracyReport(
        per_agent=tuple(per_agent),
        self_accuracy=tuple(self_acc),
        neighbor_sets=tuple(neighbor_sets),
        num_test=len(test_idx),
    )


@dataclass(frozen=True)
class EdgeLossStats:
    """Candidate-edge losses split by family agreement.

    ``separation`` is (heterophilic mean - homophilic mean) over the
    pooled standard deviation; 0 when all losses coincide, None when
    either side is empty (flagged via ``heterophilic_empty`` /
    ``homophilic_empty``).
    """

    homophilic: Tuple[float, ...]
    heterophilic: Tuple[float, ...]
    mean_homophilic: Optional[float]
    mean_heterophilic: Optional[float]
    var_homophilic: Optional[float]
    var_heterophilic: Optional[float]
    separation: Optional[float]
    homophilic_empty: bool
    heterophilic_empty: bool
    bin_edges: Tuple[float, ...]
    counts_homophilic: Tuple[int, ...]
    counts_heterophilic: Tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "homophilic": list(self.homophilic),
            "heterophilic": list(self.heterophilic),
            "mean_homophilic": self.mean_homophilic,
            "mean_heterophilic": self.mean_heterophilic,
            "var_homophilic": self.var_homophilic,
            "var_heterophilic": self.var_heterophilic,
            "separation": self.separation,
            "homophilic_empty": self.homophilic_empty,
            "heterophilic_empty": self.heterophilic_empty,
            "histogram": {
                "bin_edges": list(self.bin_edges),
                "counts_homophilic": list(self.counts_homophilic),
                "counts_heterophilic": list(self.counts_heterophilic),
            },
        }

    def histogram_rows(self):
        """(bin_left, bin_right, count, class) rows for CSV emission."""
        rows = []
        for name, counts in (
            ("homophilic", self.counts_homophilic),
            ("heterophilic", self.counts_heterophilic),
        ):
            for k, c in enumerate(counts):
                rows.append((self.bin_edges[k], self.bin_edges[k + 1], c, name))
        return rows


def _sample_stats(x: np.ndarray):
    if x.size == 0:
        return None, None
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
    return mean, var


def edge_loss_stats(
    candidates,
    family_of: np.ndarray,
    which: str = "normalized",
    bin_width: Optional[float] = None,
    num_bins: int = 20,
) -> EdgeLossStats:
    """Split candidate losses into within/between-family samples.

    Parameters
    ----------
    candidates : sequence of EdgeCandidate
        Typically ``sheaf.candidates`` (all scored pairs, not just the
        selected edges).
    family_of : (V,) int array
        Family label per agent (ground truth or hypothesis).
    which : {"normalized", "raw"}
        Which loss enters the statistics.
    bin_width : float, optional
        Histogram bin width over the combined loss range; ``num_bins``
        equal bins are used when omitted.
    """
    if which not in ("normalized", "raw"):
        raise ValueError(f"unknown loss kind {which!r}")
    family_of = np.asarray(family_of).ravel()
    hom, het = [], []
    for c in candidates:
        loss = c.norm_loss if which == "normalized" else c.raw_loss
        (hom if family_of[c.u] == family_of[c.v] else het).append(float(loss))
    hom_a, het_a = np.array(hom), np.array(het)

    mean_hom, var_hom = _sample_stats(hom_a)
    mean_het, var_het = _sample_stats(het_a)

    separation = None
    if hom_a.size > 0 and het_a.size > 0:
        n1, n2 = hom_a.size, het_a.size
        if n1 + n2 > 2:
            pooled = np.sqrt(((n1 - 1) * var_hom + (n2 - 1) * var_het) / (n1 + n2 - 2))
        else:
            pooled = 0.0
        diff = mean_het - mean_hom
        if pooled > 0.0:
            separation = float(diff / pooled)
        else:
            separation = 0.0 if diff == 0.0 else float(np.sign(diff) * np.inf)

    both = np.concatenate([hom_a, het_a]) if hom_a.size + het_a.size else np.array([0.0])
    lo, hi = float(both.min()), float(both.max())
    if bin_width is not None:
        if bin_width <= 0:
            raise ValueError("bin_width must be positive")
        edges = np.arange(lo, hi + bin_width, bin_width)
        if edges.size < 2:
            edges = np.array([lo, lo + bin_width])
    else:
        edges = np.linspace(lo, hi if hi > lo else lo + 1.0, num_bins + 1)
    counts_hom, _ = np.histogram(hom_a, bins=edges)
    counts_het, _ = np.histogram(het_a, bins=edges)

    return EdgeLossStats(
        homophilic=tuple(hom),
        heterophilic=tuple(het),
        mean_homophilic=mean_hom,
        mean_heterophilic=mean_het,
        var_homophilic=var_hom,
        var_heterophilic=var_het,
        separation=separation,
        homophilic_empty=hom_a.size == 0,
        heterophilic_empty=het_a.size == 0,
        bin_edges=tuple(float(e) for e in edges),
        counts_homophilic=tuple(int(c) for c in counts_hom),
        counts_heterophilic=tuple(int(c) for c in counts_het),
    )


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand index between two labelings via pair counting.

    Degenerate agreement (no pair split differently) returns 1.0.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.size != b.size:
        raise DimensionMismatch("labelings must have equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)

    def pairs(x):
        return float(np.sum(x * (x - 1.0) / 2.0))

    together_both = pairs(table)
    together_a = pairs(table.sum(axis=1))
    together_b = pairs(table.sum(axis=0))
    total = a.size * (a.size - 1.0) / 2.0

    fn = together_a - together_both
    fp = together_b - together_both
    if fn == 0.0 and fp == 0.0:
        return 1.0
    tp = together_both
    tn = total - tp - fn - fp
    return float(2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn)))


@dataclass(frozen=True)
class TopologyReport:
    """Component structure of the selected edges against true families."""

    num_components: int
    component_of: Tuple[int, ...]
    ari: float
    homophilic_edges: int
    heterophilic_edges: int

    def to_json_dict(self) -> dict:
        return {
            "num_components": self.num_components,
            "component_of": list(self.component_of),
            "ari": self.ari,
            "homophilic_edges": self.homophilic_edges,
            "heterophilic_edges": self.heterophilic_edges,
        }


def _score_edges(num_nodes: int, edges, fam: np.ndarray) -> TopologyReport:
    rows, cols = [], []
    for (u, v) in edges:
        rows += [u, v]
        cols += [v, u]
    adj = csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes)
    )
    num_comp, comp = connected_components(adj, directed=False)
    hom = sum(1 for (u, v) in edges if fam[u] == fam[v])
    return TopologyReport(
        num_components=int(num_comp),
        component_of=tuple(int(c) for c in comp),
        ari=adjusted_rand_index(comp, fam),
        homophilic_edges=hom,
        heterophilic_edges=len(edges) - hom,
    )


def topology_quality(sheaf: ConnectionSheaf, true_families: np.ndarray) -> TopologyReport:
    """Connected components of the selected graph, scored against truth."""
    fam = np.asarray(true_families).ravel()
    if fam.size != sheaf.num_nodes:
        raise DimensionMismatch(
            f"{fam.size} family labels for {sheaf.num_nodes} nodes"
        )
    return _score_edges(sheaf.num_nodes, list(sheaf.edges), fam)


def threshold_sweep(
    num_nodes: int,
    candidates,
    true_families: np.ndarray,
    taus=None,
) -> Tuple[Tuple[float, TopologyReport], ...]:
    """Score the thresholded topology at every candidate cutoff.

    Parameters
    ----------
    num_nodes : int
    candidates : sequence of EdgeCandidate
        Scored pairs; an edge (u, v) is kept at cutoff tau when its
        normalized loss is <= tau.
    true_families : array of int, length num_nodes
    taus : sequence of float, optional
        Cutoffs to evaluate. Default: the sorted distinct normalized
        losses observed in ``candidates``, i.e. every achievable graph.

    Returns
    -------
    tuple of (tau, TopologyReport)
        In increasing tau order.
    """
    fam = np.asarray(true_families).ravel()
    if fam.size != num_nodes:
        raise DimensionMismatch(f"{fam.size} family labels for {num_nodes} nodes")
    if taus is None:
        taus = sorted({c.norm_loss for c in candidates})
    out = []
    for tau in taus:
        edges = [(c.u, c.v) for c in candidates if c.norm_loss <= tau]
        out.append((float(tau), _score_edges(num_nodes, edges, fam)))
    return tuple(out)
