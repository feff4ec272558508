"""Shared domain types and basic validation/stacking utilities.

All matrices are dense ``float64``. Values are immutable after
construction (arrays are marked read-only), so every type here can be
shared freely across threads; "mutation" always means building a new
value.

Conventions used throughout the library:

* an agent's embedding matrix is ``d x n`` with one column per sample,
  and columns are matched sample-wise across agents;
* the horizontal stacking of all agents is ``d x (n V)`` in agent-index
  order (used by the dictionary solver), while the vertical stacking is
  ``(d V) x n`` (used by sheaf quadratic forms).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import BadBudget, DimensionMismatch, NonFiniteData

__all__ = [
    "AgentEmbeddings",
    "StackedEmbeddings",
    "Dictionary",
    "SparseCodes",
    "ConnectionSheaf",
    "SheafLaplacian",
    "Residuals",
    "SolverState",
    "TopK",
    "Threshold",
    "EdgeRule",
    "parse_edge_rule",
    "LearnConfig",
    "validate_network",
    "reconstruct",
    "haar_orthogonal",
]


def _readonly(M: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Return a C-contiguous read-only float64 copy of ``M``."""
    A = np.array(M, dtype=dtype, order="C", copy=True)
    A.setflags(write=False)
    return A


def haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    """Draw a Haar-distributed orthogonal d x d matrix.

    QR of a Gaussian matrix with the R-diagonal sign fix, which makes the
    factorization unique and the distribution uniform over O(d).
    """
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentEmbeddings:
    """One agent's latent representation matrix (d x n, columns = samples)."""

    agent_id: int
    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix)
        if M.ndim != 2:
            raise DimensionMismatch(
                f"agent {self.agent_id}: embedding matrix must be 2-D, got ndim={M.ndim}"
            )
        object.__setattr__(self, "matrix", _readonly(M))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class StackedEmbeddings:
    """Validated network of sample-aligned agent embeddings.

    ``stacked`` is the d x (n V) horizontal concatenation of the blocks in
    agent-index order; column block i equals ``blocks[i].matrix`` exactly.
    """

    blocks: tuple
    stacked: np.ndarray

    @property
    def num_agents(self) -> int:
        return len(self.blocks)

    @property
    def d(self) -> int:
        return self.blocks[0].d

    @property
    def n(self) -> int:
        return self.blocks[0].n

    def block(self, i: int) -> np.ndarray:
        """The i-th d x n column block of ``stacked``."""
        n = self.n
        return self.stacked[:, i * n : (i + 1) * n]

    @property
    def matrices(self) -> list:
        return [b.matrix for b in self.blocks]

    @property
    def vstacked(self) -> np.ndarray:
        """The (d V) x n vertical stacking used by sheaf quadratic forms."""
        return np.vstack(self.matrices)


def validate_network(blocks: Sequence[AgentEmbeddings]) -> StackedEmbeddings:
    """Check a list of agent embeddings and return their stacked form.

    Parameters
    ----------
    blocks : sequence of AgentEmbeddings or of (d, n) arrays
        One entry per agent, sample-aligned. Bare arrays are wrapped with
        agent ids 0..V-1.

    Returns
    -------
    StackedEmbeddings

    Raises
    ------
    DimensionMismatch
        If the list is empty or agents disagree on d or n.
    NonFiniteData
        If any entry is NaN or infinite.
    """
    blocks = tuple(
        b if isinstance(b, AgentEmbeddings) else AgentEmbeddings(i, b)
        for i, b in enumerate(blocks)
    )
    if not blocks:
        raise DimensionMismatch("network must contain at least one agent")
    d, n = blocks[0].d, blocks[0].n
    for b in blocks:
        if b.d != d or b.n != n:
            raise DimensionMismatch(
                f"agent {b.agent_id} has shape {b.matrix.shape}, expected {(d, n)}"
            )
        if not np.isfinite(b.matrix).all():
            raise NonFiniteData(f"agent {b.agent_id} contains non-finite entries")
    stacked = _readonly(np.hstack([b.matrix for b in blocks]))
    return StackedEmbeddings(blocks=blocks, stacked=stacked)


# ---------------------------------------------------------------------------
# Dictionary and codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dictionary:
    """Shared d x d semantic space; columns are atoms.

    At a converged solution every atom has unit Euclidean norm (oblique
    manifold membership within 1e-6). ``gamma`` records the
    atom-collinearity penalty weight used at learning time.
    """

    atoms: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.atoms)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"dictionary must be square, got {A.shape}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "atoms", _readonly(A))

    @property
    def d(self) -> int:
        return self.atoms.shape[0]

    def atom_norm_violation(self) -> float:
        """max_k | ||atom_k||_2 - 1 |, the oblique-manifold residual."""
        return float(np.max(np.abs(np.linalg.norm(self.atoms, axis=0) - 1.0)))


@dataclass(frozen=True)
class SparseCodes:
    """Per-agent d x n codes with a row-support budget."""

    agent_id: int
    codes: np.ndarray
    budget: int

    def __post_init__(self):
        C = np.asarray(self.codes)
        if C.ndim != 2:
            raise DimensionMismatch("codes must be 2-D")
        if not (1 <= self.budget <= C.shape[0]):
            raise BadBudget(
                f"budget {self.budget} out of range [1, {C.shape[0]}]"
            )
        object.__setattr__(self, "codes", _readonly(C))

    def row_support(self) -> np.ndarray:
        """Indices of rows with nonzero Euclidean norm."""
        return np.flatnonzero(np.linalg.norm(self.codes, axis=1) > 0)


def reconstruct(D, S) -> np.ndarray:
    """Denoised representation D @ S_i of one agent.

    Accepts :class:`Dictionary`/:class:`SparseCodes` or plain arrays.
    """
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=np.float64)
    C = S.codes if isinstance(S, SparseCodes) else np.asarray(S, dtype=np.float64)
    if A.ndim != 2 or C.ndim != 2 or A.shape[1] != C.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply dictionary {A.shape} with codes {C.shape}"
        )
    return A @ C


# ---------------------------------------------------------------------------
# Sheaf containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionSheaf:
    """Selected communication topology with per-edge orthogonal maps.

    ``edges`` are unique pairs (u, v) with u < v; ``maps[(u, v)]`` is the
    d x d orthogonal alignment carrying node u's coordinates into node v's
    (the edge restriction convention is F_u = O_uv, F_v = I). Per-edge raw
    and normalized losses are kept in ``edge_losses``; ``candidates``
    optionally retains the full scored candidate table.
    """

    num_nodes: int
    d: int
    edges: tuple
    maps: dict
    edge_losses: dict
    candidates: tuple = ()

    _ORTHO_TOL = 1e-8

    def __post_init__(self):
        seen = set()
        for (u, v) in self.edges:
            if not (0 <= u < v < self.num_nodes):
                raise ValueError(f"edge ({u}, {v}) is not a valid pair with u < v")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            O = np.asarray(self.maps[(u, v)])
            if O.shape != (self.d, self.d):
                raise DimensionMismatch(
                    f"map for edge ({u}, {v}) has shape {O.shape}, expected {(self.d, self.d)}"
                )
            if np.linalg.norm(O.T @ O - np.eye(self.d)) > self._ORTHO_TOL:
                raise ValueError(f"map for edge ({u}, {v}) is not orthogonal")
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(
            self, "maps", {tuple(e): _readonly(self.maps[tuple(e)]) for e in self.edges}
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> list:
        return sorted(u for e in self.edges for u in e if v in e and u != v)


@dataclass(frozen=True)
class SheafLaplacian:
    """Dense (d V) x (d V) sheaf Laplacian with d x d block access."""

    matrix: np.ndarray
    d: int
    num_nodes: int

    def __post_init__(self):
        M = np.asarray(self.matrix)
        dim = self.d * self.num_nodes
        if M.shape != (dim, dim):
            raise DimensionMismatch(f"Laplacian shape {M.shape}, expected {(dim, dim)}")
        object.__setattr__(self, "matrix", _readonly(M))

    @property
    def dimension(self) -> int:
        return self.d * self.num_nodes

    def block(self, u: int, v: int) -> np.ndarray:
        d = self.d
        return self.matrix[u * d : (u + 1) * d, v * d : (v + 1) * d]


# ---------------------------------------------------------------------------
# Solver state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Residuals:
    """Primal/dual residual norms of one splitting iteration.

    ``primal_codes`` and ``dual_codes`` carry one entry per agent.
    """

    primal_dict: float
    primal_codes: np.ndarray
    dual_dict: float
    dual_codes: np.ndarray

    @property
    def max_primal(self) -> float:
        return max(self.primal_dict, float(np.max(self.primal_codes)))

    @property
    def max_dual(self) -> float:
        return max(self.dual_dict, float(np.max(self.dual_codes)))


@dataclass(frozen=True)
class SolverState:
    """All variables of one solver iteration.

    ``D`` d x d dictionary iterate, ``S`` d x (n V) stacked codes,
    ``P`` unit-column splitting variable, ``Z`` per-agent n x d consensus
    variables (always a prox output, hence feasible), ``R``/``U`` scaled
    duals, plus the penalty, iteration counter, current smoothing stepsize
    and latest residual norms.
    """

    D: np.ndarray
    S: np.ndarray
    P: np.ndarray
    Z: tuple
    R: np.ndarray
    U: tuple
    rho: float
    gamma: float
    step: int
    alpha: float
    residuals: Optional[Residuals] = None

    def codes_block(self, i: int, n: int) -> np.ndarray:
        return self.S[:, i * n : (i + 1) * n]


# ---------------------------------------------------------------------------
# Edge-selection rules and learning configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopK:
    """Keep the ``count`` candidate edges of smallest raw loss."""

    count: int


@dataclass(frozen=True)
class Threshold:
    """Keep candidate edges with normalized loss <= ``tau``."""

    tau: float


EdgeRule = Union[TopK, Threshold]


def parse_edge_rule(text: str) -> EdgeRule:
    """Parse ``"topk:K"`` or ``"threshold:T"`` into an edge rule."""
    kind, _, value = text.partition(":")
    kind = kind.strip().lower()
    if kind == "topk":
        return TopK(count=int(value))
    if kind == "threshold":
        return Threshold(tau=float(value))
    raise ValueError(f"unknown edge rule {text!r}; expected 'topk:K' or 'threshold:T'")


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters for dictionary and topology learning.

    ``budgets`` may be a single int (broadcast to every agent), a sequence
    with one entry per agent, or None for the uncompressed budget d. The
    smoothing stepsize schedule is ``alpha0 / (1 + mu * q)``, which is
    diminishing and non-summable for mu > 0 and stays in (0, 1] for
    alpha0 in (0, 1].
    """

    gamma: float = 0.1
    rho: float = 1.0
    budgets: Union[int, Sequence[int], None] = None
    alpha0: float = 0.9
    mu: float = 0.01
    max_iters: int = 2000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    seed: int = 0
    edge_rule: EdgeRule = field(default_factory=lambda: Threshold(0.8))
    candidate_edges: Optional[tuple] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if not (0 < self.alpha0 <= 1):
            raise ValueError("alpha0 must lie in (0, 1]")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eps_abs <= 0 or self.eps_rel < 0:
            raise ValueError("tolerances must be positive")

    def stepsize(self, q: int) -> float:
        return self.alpha0 / (1.0 + self.mu * q)

    def resolved_budgets(self, num_agents: int, d: int) -> list:
        """Per-agent budget list, validated against 1 <= budget <= d."""
        if self.budgets is None:
            budgets = [d] * num_agents
        elif isinstance(self.budgets, (int, np.integer)):
            budgets = [int(self.budgets)] * num_agents
        else:
            budgets = [int(b) for b in self.budgets]
            if len(budgets) != num_agents:
                raise BadBudget(
                    f"{len(budgets)} budgets given for {num_agents} agents"
                )
        for b in budgets:
            if not (1 <= b <= d):
                raise BadBudget(f"budget {b} out of range [1, {d}]")
        return budgets
