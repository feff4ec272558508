"""Topology and alignment-map learning over a network of representations.

Every candidate edge (u, v) gets the orthogonal map that best carries
node u's representation matrix onto node v's (an orthogonal Procrustes
fit), together with its raw and normalized misalignment losses. Edges
are then kept either by a budget on the count of lowest-raw-loss edges
or by a threshold on normalized loss. The retained structure is a
connection sheaf; its coboundary operator and Laplacian expose total
variation and (numerical) global-section diagnostics.

Orientation convention: for a stored edge (u, v) with u < v the node-u
restriction map is O_uv and the node-v map is the identity, so the
per-edge disagreement is ||O_uv A_u - A_v||_F^2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import (
    ConnectionSheaf,
    LearnConfig,
    SheafLaplacian,
    StackedEmbeddings,
    Threshold,
    TopK,
)
from .errors import BadBudget, DimensionMismatch, UnknownEdge, ZeroReference

__all__ = [
    "EdgeCandidate",
    "procrustes_align",
    "edge_loss",
    "learn_sheaf",
    "build_coboundary",
    "build_sheaf_laplacian",
    "total_variation",
    "is_local_section",
    "global_section_dim",
]


@dataclass(frozen=True)
class EdgeCandidate:
    """A scored candidate edge: optimal orthogonal map plus losses.

    ``norm_loss`` divides the raw loss by ||A_u||_F^2 (lower node index);
    ``norm_loss_reverse`` divides by ||A_v||_F^2, since the normalization
    is directional while the raw optimum is not.
    """

    u: int
    v: int
    map: np.ndarray
    raw_loss: float
    norm_loss: float
    norm_loss_reverse: float


def procrustes_align(A_u: np.ndarray, A_v: np.ndarray) -> np.ndarray:
    """Orthogonal map O minimizing ||O A_u - A_v||_F^2 over O(d).

    Computed as W Y^T from the singular value decomposition
    W Sigma Y^T = A_v A_u^T. When A_v A_u^T is rank deficient the
    minimizer is not unique; the SVD-based choice is deterministic.

    Parameters
    ----------
    A_u, A_v : (d, n) arrays
        Finite matrices of identical shape.

    Returns
    -------
    (d, d) orthogonal array
    """
    A_u = np.asarray(A_u, dtype=np.float64)
    A_v = np.asarray(A_v, dtype=np.float64)
    if A_u.ndim != 2 or A_u.shape != A_v.shape:
        raise DimensionMismatch(
            f"representations must share one shape, got {A_u.shape} and {A_v.shape}"
        )
    W, _, Yt = np.linalg.svd(A_v @ A_u.T)
    return W @ Yt


def edge_loss(O: np.ndarray, A_u: np.ndarray, A_v: np.ndarray) -> Tuple[float, float]:
    """Raw and normalized misalignment of a candidate map.

    Returns
    -------
    (raw, normalized)
        ``raw = ||O A_u - A_v||_F^2`` and ``normalized = raw / ||A_u||_F^2``.

    Raises
    ------
    ZeroReference
        If ||A_u||_F = 0, which leaves the normalized loss undefined.
    """
    O = np.asarray(O, dtype=np.float64)
    A_u = np.asarray(A_u, dtype=np.float64)
    A_v = np.asarray(A_v, dtype=np.float64)
    if A_u.shape != A_v.shape or O.shape != (A_u.shape[0], A_u.shape[0]):
        raise DimensionMismatch(
            f"incompatible shapes: map {O.shape}, A_u {A_u.shape}, A_v {A_v.shape}"
        )
    raw = float(np.linalg.norm(O @ A_u - A_v) ** 2)
    ref = float(np.linalg.norm(A_u) ** 2)
    if ref == 0.0:
        raise ZeroReference("reference representation has zero norm")
    return raw, raw / ref


def _canonical_pairs(pairs, num_nodes: int) -> list:
    canon = set()
    for (u, v) in pairs:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop ({u}, {u}) is not a valid candidate edge")
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"candidate edge ({u}, {v}) references unknown nodes")
        canon.add((min(u, v), max(u, v)))
    return sorted(canon)


def learn_sheaf(representations: Sequence[np.ndarray], config: LearnConfig) -> ConnectionSheaf:
    """Fit per-edge orthogonal maps on all candidate edges and select.

    Parameters
    ----------
    representations : StackedEmbeddings or list of V matrices, each (d, n)
        Usually the denoised products D @ S_i; raw embeddings X_i give
        the no-dictionary baseline.
    config : LearnConfig
        ``edge_rule`` picks the selection (TopK on raw loss, Threshold on
        normalized loss); ``candidate_edges`` restricts the candidate set
        (default: all unordered pairs). TopK ties at the budget boundary
        prefer lexicographically smaller (u, v).

    Returns
    -------
    ConnectionSheaf
        Maps and losses for the kept edges; the full scored candidate
        table is retained on ``candidates`` for analysis.

    Raises
    ------
    BadBudget
        If a TopK budget exceeds the number of candidates.
    """
    if isinstance(representations, StackedEmbeddings):
        representations = representations.matrices
    reps = [np.asarray(R, dtype=np.float64) for R in representations]
    V = len(reps)
    if V < 1:
        raise DimensionMismatch("need at least one representation")
    shape = reps[0].shape
    for i, R in enumerate(reps):
        if R.ndim != 2 or R.shape != shape:
            raise DimensionMismatch(
                f"representation {i} has shape {R.shape}, expected {shape}"
            )
    d = shape[0]

    if config.candidate_edges is not None:
        pairs = _canonical_pairs(config.candidate_edges, V)
    else:
        pairs = list(itertools.combinations(range(V), 2))

    candidates = []
    for (u, v) in pairs:
        O = procrustes_align(reps[u], reps[v])
        raw, norm = edge_loss(O, reps[u], reps[v])
        ref_v = float(np.linalg.norm(reps[v]) ** 2)
        if ref_v == 0.0:
            raise ZeroReference(f"representation {v} has zero norm")
        candidates.append(
            EdgeCandidate(
                u=u, v=v, map=O, raw_loss=raw, norm_loss=norm,
                norm_loss_reverse=raw / ref_v,
            )
        )

    rule = config.edge_rule
    if isinstance(rule, TopK):
        if rule.count < 0 or rule.count > len(candidates):
            raise BadBudget(
                f"edge budget {rule.count} out of range [0, {len(candidates)}]"
            )
        ranked = sorted(candidates, key=lambda c: (c.raw_loss, (c.u, c.v)))
        kept = sorted(ranked[: rule.count], key=lambda c: (c.u, c.v))
    elif isinstance(rule, Threshold):
        kept = [c for c in candidates if c.norm_loss <= rule.tau]
    else:
        raise TypeError(f"unknown edge rule {rule!r}")

    return ConnectionSheaf(
        num_nodes=V,
        d=d,
        edges=tuple((c.u, c.v) for c in kept),
        maps={(c.u, c.v): c.map for c in kept},
        edge_losses={(c.u, c.v): (c.raw_loss, c.norm_loss) for c in kept},
        candidates=tuple(candidates),
    )


def build_coboundary(sheaf: ConnectionSheaf) -> np.ndarray:
    """Block coboundary operator, one d-row band per edge.

    For edge e = (u, v) the band holds O_uv in node u's column block and
    -I_d in node v's, so applying it to a vertically stacked 0-cochain
    yields every per-edge disagreement O_uv x_u - x_v.
    """
    d, V, E = sheaf.d, sheaf.num_nodes, sheaf.num_edges
    delta = np.zeros((d * E, d * V))
    eye = np.eye(d)
    for k, (u, v) in enumerate(sheaf.edges):
        delta[k * d : (k + 1) * d, u * d : (u + 1) * d] = sheaf.maps[(u, v)]
        delta[k * d : (k + 1) * d, v * d : (v + 1) * d] = -eye
    return delta


def build_sheaf_laplacian(sheaf: ConnectionSheaf) -> SheafLaplacian:
    """Assemble the (d V) x (d V) Laplacian blockwise.

    Diagonal block uu accumulates the restriction Gramians of all edges
    at u (degree(u) * I_d for orthogonal maps); off-diagonal block uv is
    -O_uv^T for a stored edge (u, v) and its transpose at (v, u). Equal
    to the coboundary product delta^T delta.
    """
    d, V = sheaf.d, sheaf.num_nodes
    L = np.zeros((d * V, d * V))
    eye = np.eye(d)

    def blk(a, b):
        return (slice(a * d, (a + 1) * d), slice(b * d, (b + 1) * d))

    for (u, v) in sheaf.edges:
        O = sheaf.maps[(u, v)]
        L[blk(u, u)] += O.T @ O
        L[blk(v, v)] += eye
        L[blk(u, v)] = -O.T
        L[blk(v, u)] = -O
    return SheafLaplacian(matrix=L, d=d, num_nodes=V)


def total_variation(L: SheafLaplacian, X) -> float:
    """Quadratic form tr(X^T L X) on the vertically stacked signal.

    Equals the sum over edges of ||O_uv X_u - X_v||_F^2. ``X`` may be a
    StackedEmbeddings (its blocks are stacked vertically) or a plain
    (d V, m) array.
    """
    Xv = X.vstacked if isinstance(X, StackedEmbeddings) else np.asarray(X, dtype=np.float64)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    if Xv.shape[0] != L.dimension:
        raise DimensionMismatch(
            f"signal has {Xv.shape[0]} rows, Laplacian dimension is {L.dimension}"
        )
    return float(np.sum(Xv * (L.matrix @ Xv)))


def is_local_section(
    sheaf: ConnectionSheaf, e, x_u: np.ndarray, x_v: np.ndarray, eps: float
) -> bool:
    """Whether (x_u, x_v) agree across edge e within tolerance eps.

    The pair is ordered like ``e``; either orientation of a stored edge
    is accepted.
    """
    a, b = int(e[0]), int(e[1])
    x_a = np.asarray(x_u, dtype=np.float64)
    x_b = np.asarray(x_v, dtype=np.float64)
    if (a, b) in sheaf.maps:
        gap = sheaf.maps[(a, b)] @ x_a - x_b
    elif (b, a) in sheaf.maps:
        gap = sheaf.maps[(b, a)] @ x_b - x_a
    else:
        raise UnknownEdge(f"edge ({a}, {b}) is not in the sheaf")
    return bool(np.linalg.norm(gap) <= eps)


def global_section_dim(L: SheafLaplacian, eps: float = 1e-8) -> int:
    """Dimension of the numerical kernel of the Laplacian.

    Counts eigenvalues <= eps * lambda_max; for the zero operator (empty
    edge set) every direction is a global section.
    """
    evals = np.linalg.eigvalsh(L.matrix)
    lam_max = max(float(evals[-1]), 0.0)
    return int(np.sum(evals <= eps * lam_max))
