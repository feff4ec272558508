"""Shared semantic dictionary learning with per-agent row-sparse codes.

Minimizes

    0.5 * ||X - D S||_F^2 - gamma * logdet(D^T D)

over dictionaries D with unit-norm atoms and stacked codes
S = [S_1, ..., S_V] subject to per-agent row-support budgets
(at most d'_i nonzero rows in S_i).

The nonconvexity is handled three ways at once: the unit-norm constraint
by a splitting variable P with column-wise normalization, the bilinear
fit and log-determinant terms by successive convex approximation around
the current iterate (with a diminishing smoothing stepsize), and the
row-support constraint by per-agent consensus variables Z_i projected
with the exact (2,0)-ball proximal map. Primal/dual updates follow the
scaled-ADMM pattern and convergence is declared from standard residual
feasibility conditions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import (
    Dictionary,
    LearnConfig,
    Residuals,
    SolverState,
    SparseCodes,
    StackedEmbeddings,
)
from .errors import BadBudget, SingularGramian

logger = logging.getLogger(__name__)

__all__ = [
    "objective_p2",
    "surrogate_objective",
    "prox_group_20",
    "update_dictionary",
    "update_codes",
    "project_oblique",
    "init_state",
    "sca_admm_step",
    "learn_dictionary",
    "ConvergenceReport",
]


def _atoms(D) -> np.ndarray:
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=np.float64)


def _stacked(X) -> np.ndarray:
    return X.stacked if isinstance(X, StackedEmbeddings) else np.asarray(X, dtype=np.float64)


def _logdet_gramian(D: np.ndarray) -> float:
    sign, logabs = np.linalg.slogdet(D.T @ D)
    if sign <= 0 or not np.isfinite(logabs):
        raise SingularGramian("D^T D is singular; log-determinant undefined")
    return float(logabs)


def _gramian_inverse_term(D: np.ndarray) -> np.ndarray:
    """D (D^T D)^{-1}, the collinearity-penalty factor of the D update."""
    G = D.T @ D
    try:
        return np.linalg.solve(G, D.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularGramian("D^T D is singular; dictionary iterate degenerate") from exc


def objective_p2(D, S, X, gamma: float = None) -> float:
    """Fit-plus-collinearity objective of the dictionary learning problem.

    Parameters
    ----------
    D : Dictionary or (d, d) array
    S : (d, nV) array
        Stacked codes.
    X : StackedEmbeddings or (d, nV) array
    gamma : float, optional
        Penalty weight; defaults to ``D.gamma`` when D is a Dictionary,
        else 0.

    Returns
    -------
    float
        ``0.5 * ||X - D S||_F^2 - gamma * logdet(D^T D)``.

    Raises
    ------
    SingularGramian
        If gamma > 0 and D^T D is singular.
    """
    if gamma is None:
        gamma = D.gamma if isinstance(D, Dictionary) else 0.0
    Da, Sa, Xa = _atoms(D), np.asarray(S, dtype=np.float64), _stacked(X)
    fit = 0.5 * np.linalg.norm(Xa - Da @ Sa) ** 2
    if gamma == 0:
        return float(fit)
    return float(fit - gamma * _logdet_gramian(Da))


def surrogate_objective(D, S, D_anchor, S_anchor, X, gamma: float) -> float:
    """Strongly convex local model of :func:`objective_p2` at an anchor.

    The bilinear fit is split into the two partially-linearized halves
    ``0.5||X - D S_anchor||^2 + 0.5||X - D_anchor S||^2`` and the
    log-determinant penalty is linearized at the anchor, so the gradients
    of the model and of the true objective coincide at the anchor point
    in both the D and S blocks.
    """
    Da, Sa, Xa = _atoms(D), np.asarray(S, dtype=np.float64), _stacked(X)
    A, Sq = _atoms(D_anchor), np.asarray(S_anchor, dtype=np.float64)
    value = 0.5 * np.linalg.norm(Xa - Da @ Sq) ** 2
    value += 0.5 * np.linalg.norm(Xa - A @ Sa) ** 2
    if gamma != 0:
        grad_logdet = 2.0 * _gramian_inverse_term(A)
        value -= gamma * (_logdet_gramian(A) + np.sum(grad_logdet * (Da - A)))
    return float(value)


def prox_group_20(Y: np.ndarray, budget: int) -> np.ndarray:
    """Exact projection onto the (2,0)-ball: keep the ``budget`` columns
    of largest Euclidean norm, zero the rest.

    This is the exact minimizer of ||Z - Y||_F^2 over matrices with at
    most ``budget`` nonzero columns. Ties at the boundary keep the lowest
    column indices.

    Parameters
    ----------
    Y : (m, k) array
    budget : int
        Number of columns to retain, 1 <= budget <= k.

    Raises
    ------
    BadBudget
        If ``budget`` is out of range.
    """
    Y = np.asarray(Y, dtype=np.float64)
    ncols = Y.shape[1]
    if not (1 <= budget <= ncols):
        raise BadBudget(f"budget {budget} out of range [1, {ncols}]")
    if budget == ncols:
        return Y.copy()
    norms = np.linalg.norm(Y, axis=0)
    keep = np.argsort(-norms, kind="stable")[:budget]
    Z = np.zeros_like(Y)
    Z[:, keep] = Y[:, keep]
    return Z


def update_dictionary(state: SolverState, X: StackedEmbeddings) -> np.ndarray:
    """Closed-form dictionary refinement of one iteration.

    Returns the unique stationary point of the D block of the augmented
    Lagrangian (quadratic fit half plus linearized penalty plus splitting
    proximity):

        D~ = (X S^T + rho (P - R) + gamma D (D^T D)^{-1}) A^{-1},
        A  = S S^T + rho I.

    Raises
    ------
    SingularGramian
        If gamma > 0 and the current Gramian D^T D is singular.
    """
    Xa = _stacked(X)
    Sq = state.S
    A = Sq @ Sq.T + state.rho * np.eye(Sq.shape[0])
    rhs = Xa @ Sq.T + state.rho * (state.P - state.R)
    if state.gamma != 0:
        rhs = rhs + state.gamma * _gramian_inverse_term(state.D)
    return np.linalg.solve(A, rhs.T).T


def update_codes(state: SolverState, X: StackedEmbeddings, agent: int) -> np.ndarray:
    """Closed-form code refinement for one agent:

        S~_i = B^{-1} (D^T X_i + rho (Z_i^T - U_i^T)),  B = D^T D + rho I.
    """
    Dq = state.D
    B = Dq.T @ Dq + state.rho * np.eye(Dq.shape[1])
    X_i = X.block(agent)
    rhs = Dq.T @ X_i + state.rho * (state.Z[agent].T - state.U[agent].T)
    return np.linalg.solve(B, rhs)


def project_oblique(M: np.ndarray, R_dual: np.ndarray) -> np.ndarray:
    """Column-wise normalization of M + R_dual onto unit-norm columns.

    An exactly-zero column has no well-defined direction; it is replaced
    by the first canonical basis vector (deterministic, logged) so the
    iteration stays alive.
    """
    C = np.asarray(M, dtype=np.float64) + np.asarray(R_dual, dtype=np.float64)
    norms = np.linalg.norm(C, axis=0)
    zero = norms == 0.0
    if np.any(zero):
        logger.warning(
            "project_oblique: %d zero column(s) replaced by e_1", int(zero.sum())
        )
        C = C.copy()
        C[:, zero] = 0.0
        C[0, zero] = 1.0
        norms = norms.copy()
        norms[zero] = 1.0
    return C / norms


def init_state(X: StackedEmbeddings, config: LearnConfig) -> SolverState:
    """Feasible warm start: seeded unit-column random dictionary,
    analysis codes S = D^T X, P = D, Z = prox of the code transposes,
    zero duals."""
    d, n, V = X.d, X.n, X.num_agents
    budgets = config.resolved_budgets(V, d)
    rng = np.random.default_rng(config.seed)
    D0 = project_oblique(rng.standard_normal((d, d)), np.zeros((d, d)))
    S0 = D0.T @ X.stacked
    Z0 = tuple(
        prox_group_20(S0[:, i * n : (i + 1) * n].T, budgets[i]) for i in range(V)
    )
    primal_codes = np.array(
        [np.linalg.norm(S0[:, i * n : (i + 1) * n].T - Z0[i]) for i in range(V)]
    )
    residuals = Residuals(
        primal_dict=0.0,
        primal_codes=primal_codes,
        dual_dict=math.inf,
        dual_codes=np.full(V, math.inf),
    )
    return SolverState(
        D=D0,
        S=S0,
        P=D0.copy(),
        Z=Z0,
        R=np.zeros((d, d)),
        U=tuple(np.zeros((n, d)) for _ in range(V)),
        rho=config.rho,
        gamma=config.gamma,
        step=0,
        alpha=config.stepsize(0),
        residuals=residuals,
    )


def sca_admm_step(state: SolverState, X: StackedEmbeddings, config: LearnConfig) -> SolverState:
    """One full primal/dual iteration.

    Order of operations: dictionary refinement and smoothing, per-agent
    code refinement and smoothing, column-normalization of the splitting
    variable, per-agent consensus prox (fed with the previous dual, then
    dual ascent), dictionary dual ascent, residual bookkeeping, stepsize
    decay. The V per-agent updates are mutually independent and merged in
    agent-index order.
    """
    d, n, V = X.d, X.n, X.num_agents
    budgets = config.resolved_budgets(V, d)
    alpha = state.alpha

    D_tilde = update_dictionary(state, X)
    D_new = state.D + alpha * (D_tilde - state.D)

    S_new = np.empty_like(state.S)
    for i in range(V):
        S_tilde_i = update_codes(state, X, i)
        S_old_i = state.codes_block(i, n)
        S_new[:, i * n : (i + 1) * n] = S_old_i + alpha * (S_tilde_i - S_old_i)

    P_new = project_oblique(D_new, state.R)

    Z_new: List[np.ndarray] = []
    U_new: List[np.ndarray] = []
    primal_codes = np.empty(V)
    dual_codes = np.empty(V)
    for i in range(V):
        Si_T = S_new[:, i * n : (i + 1) * n].T
        Z_i = prox_group_20(Si_T + state.U[i], budgets[i])
        U_i = state.U[i] + Si_T - Z_i
        primal_codes[i] = np.linalg.norm(Si_T - Z_i)
        dual_codes[i] = state.rho * np.linalg.norm(Z_i - state.Z[i])
        Z_new.append(Z_i)
        U_new.append(U_i)

    R_new = state.R + D_new - P_new
    residuals = Residuals(
        primal_dict=float(np.linalg.norm(D_new - P_new)),
        primal_codes=primal_codes,
        dual_dict=float(state.rho * np.linalg.norm(P_new - state.P)),
        dual_codes=dual_codes,
    )
    return SolverState(
        D=D_new,
        S=S_new,
        P=P_new,
        Z=tuple(Z_new),
        R=R_new,
        U=tuple(U_new),
        rho=state.rho,
        gamma=state.gamma,
        step=state.step + 1,
        alpha=config.stepsize(state.step + 1),
        residuals=residuals,
    )


def _converged(state: SolverState, X: StackedEmbeddings, config: LearnConfig) -> bool:
    """Scaled-ADMM residual feasibility: every primal residual below
    eps_abs + eps_rel * (iterate scale) and every dual residual below
    eps_abs + eps_rel * (scaled-dual scale)."""
    res = state.residuals
    n = X.n
    eps_a, eps_r = config.eps_abs, config.eps_rel
    if res.primal_dict > eps_a + eps_r * max(
        np.linalg.norm(state.D), np.linalg.norm(state.P)
    ):
        return False
    if res.dual_dict > eps_a + eps_r * state.rho * np.linalg.norm(state.R):
        return False
    for i in range(X.num_agents):
        scale_i = max(
            np.linalg.norm(state.codes_block(i, n)), np.linalg.norm(state.Z[i])
        )
        if res.primal_codes[i] > eps_a + eps_r * scale_i:
            return False
        if res.dual_codes[i] > eps_a + eps_r * state.rho * np.linalg.norm(state.U[i]):
            return False
    return True


@dataclass
class ConvergenceReport:
    """Per-iteration residual and objective traces of one solver run."""

    iterations: int
    converged: bool
    max_iters_exceeded: bool
    primal_dict_trace: list
    primal_codes_trace: list
    dual_dict_trace: list
    dual_codes_trace: list
    objective_trace: list
    final_objective: float

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "max_iters_exceeded": self.max_iters_exceeded,
            "primal_dict_trace": [float(x) for x in self.primal_dict_trace],
            "primal_codes_trace": [float(x) for x in self.primal_codes_trace],
            "dual_dict_trace": [float(x) for x in self.dual_dict_trace],
            "dual_codes_trace": [float(x) for x in self.dual_codes_trace],
            "objective_trace": [float(x) for x in self.objective_trace],
            "final_objective": float(self.final_objective),
        }


def _guarded_objective(state: SolverState, X: StackedEmbeddings) -> float:
    try:
        return objective_p2(state.D, state.S, X, gamma=state.gamma)
    except SingularGramian:
        return math.inf


def learn_dictionary(
    X: StackedEmbeddings, config: LearnConfig
) -> Tuple[Dictionary, List[SparseCodes], ConvergenceReport]:
    """Run the full solver and package the learned artifacts.

    Iterates :func:`sca_admm_step` from the seeded warm start until the
    residual feasibility conditions hold or ``config.max_iters`` is
    reached (the latter is flagged on the report, not raised).

    Returns
    -------
    (Dictionary, list of SparseCodes, ConvergenceReport)
        The dictionary is taken from the splitting variable P, so its
        atoms have exactly unit norm. Each agent's codes are
        hard-thresholded to the row support of its final consensus
        variable, which guarantees the budget constraint on the returned
        artifact.
    """
    d, n, V = X.d, X.n, X.num_agents
    budgets = config.resolved_budgets(V, d)
    state = init_state(X, config)

    primal_d, primal_s, dual_d, dual_s, objective = [], [], [], [], []
    converged = False
    for _ in range(config.max_iters):
        state = sca_admm_step(state, X, config)
        res = state.residuals
        primal_d.append(res.primal_dict)
        primal_s.append(float(np.max(res.primal_codes)))
        dual_d.append(res.dual_dict)
        dual_s.append(float(np.max(res.dual_codes)))
        objective.append(_guarded_objective(state, X))
        if _converged(state, X, config):
            converged = True
            break

    if not converged:
        logger.warning(
            "dictionary learning stopped at max_iters=%d with residuals "
            "primal=%.3e dual=%.3e",
            config.max_iters,
            state.residuals.max_primal,
            state.residuals.max_dual,
        )

    dictionary = Dictionary(atoms=state.P, gamma=config.gamma)
    codes = []
    for i in range(V):
        support = np.linalg.norm(state.Z[i], axis=0) > 0
        S_i = state.codes_block(i, n).copy()
        S_i[~support, :] = 0.0
        codes.append(SparseCodes(agent_id=i, codes=S_i, budget=budgets[i]))

    report = ConvergenceReport(
        iterations=state.step,
        converged=converged,
        max_iters_exceeded=not converged,
        primal_dict_trace=primal_d,
        primal_codes_trace=primal_s,
        dual_dict_trace=dual_d,
        dual_codes_trace=dual_s,
        objective_trace=objective,
        final_objective=objective[-1] if objective else math.nan,
    )
    return dictionary, codes, report
