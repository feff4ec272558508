"""Dictionary solver pieces against closed-form and numerical oracles."""

import itertools
import logging

import numpy as np
import pytest

from semnet import (
    BadBudget,
    Dictionary,
    LearnConfig,
    SingularGramian,
    init_state,
    learn_dictionary,
    objective_p2,
    project_oblique,
    prox_group_20,
    sca_admm_step,
    surrogate_objective,
    update_codes,
    update_dictionary,
    validate_network,
)


def _network(rng, d=4, n=6, V=2):
    return validate_network([rng.standard_normal((d, n)) for _ in range(V)])


# ---------------------------------------------------------------------------
# Objective and surrogate


def test_objective_matches_direct_formula():
    rng = np.random.default_rng(0)
    for _ in range(20):
        D = rng.standard_normal((4, 4))
        S = rng.standard_normal((4, 7))
        X = rng.standard_normal((4, 7))
        gamma = float(rng.uniform(0.0, 1.0))
        sign, logdet = np.linalg.slogdet(D.T @ D)
        assert sign > 0
        expected = 0.5 * np.sum((X - D @ S) ** 2) - gamma * logdet
        assert objective_p2(D, S, X, gamma) == pytest.approx(expected, rel=1e-12)


def test_objective_gamma_defaults_to_dictionary_weight():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 3))
    S = rng.standard_normal((3, 5))
    X = rng.standard_normal((3, 5))
    D = Dictionary(atoms=A / np.linalg.norm(A, axis=0), gamma=0.3)
    assert objective_p2(D, S, X) == pytest.approx(
        objective_p2(D.atoms, S, X, gamma=0.3)
    )
    # Plain arrays default to the unpenalized objective.
    assert objective_p2(A, S, X) == pytest.approx(0.5 * np.sum((X - A @ S) ** 2))


def test_objective_raises_on_singular_gramian():
    D = np.ones((3, 3))  # rank one
    with pytest.raises(SingularGramian):
        objective_p2(D, np.zeros((3, 2)), np.zeros((3, 2)), gamma=0.1)
    assert objective_p2(D, np.zeros((3, 2)), np.zeros((3, 2)), gamma=0.0) == 0.0


def test_surrogate_value_at_anchor():
    # At the anchor the split fit doubles and the linearization collapses
    # to the plain log-determinant.
    rng = np.random.default_rng(2)
    D = rng.standard_normal((3, 3))
    S = rng.standard_normal((3, 8))
    X = rng.standard_normal((3, 8))
    gamma = 0.25
    fit = 0.5 * np.sum((X - D @ S) ** 2)
    _, logdet = np.linalg.slogdet(D.T @ D)
    assert surrogate_objective(D, S, D, S, X, gamma) == pytest.approx(
        2.0 * fit - gamma * logdet, rel=1e-12
    )


def test_surrogate_upper_bounds_fit_away_from_anchor():
    # With gamma = 0 the model is the sum of the two partial fits, each
    # at least the best of the pair, so it dominates either exact fit.
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3))
    Sq = rng.standard_normal((3, 6))
    X = rng.standard_normal((3, 6))
    D = A + 0.1 * rng.standard_normal((3, 3))
    S = Sq + 0.1 * rng.standard_normal((3, 6))
    model = surrogate_objective(D, S, A, Sq, X, 0.0)
    assert model >= objective_p2(D, Sq, X, 0.0) - 1e-12
    assert model >= objective_p2(A, S, X, 0.0) - 1e-12


# ---------------------------------------------------------------------------
# Projection / prox


def test_prox_matches_exhaustive_subsets():
    rng = np.random.default_rng(4)
    for _ in range(30):
        Y = rng.standard_normal((rng.integers(1, 5), rng.integers(1, 7)))
        cols = Y.shape[1]
        sq = np.linalg.norm(Y, axis=0) ** 2
        for budget in range(1, cols + 1):
            Z = prox_group_20(Y, budget)
            best = min(
                sq.sum() - sq[list(keep)].sum()
                for keep in itertools.combinations(range(cols), budget)
            )
            assert np.sum((Y - Z) ** 2) == pytest.approx(best, abs=1e-12)


def test_prox_tie_break_keeps_lowest_indices():
    Y = np.ones((2, 4))  # all columns tie
    Z = prox_group_20(Y, 2)
    np.testing.assert_array_equal(np.flatnonzero(np.linalg.norm(Z, axis=0)), [0, 1])


def test_prox_full_budget_and_range_errors():
    Y = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(prox_group_20(Y, 3), Y)
    with pytest.raises(BadBudget):
        prox_group_20(Y, 0)
    with pytest.raises(BadBudget):
        prox_group_20(Y, 4)


def test_project_oblique_normalizes_columns():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((4, 4))
    R = rng.standard_normal((4, 4))
    P = project_oblique(M, R)
    np.testing.assert_allclose(np.linalg.norm(P, axis=0), 1.0, atol=1e-12)
    C = M + R
    np.testing.assert_allclose(P, C / np.linalg.norm(C, axis=0), atol=1e-12)


def test_project_oblique_replaces_zero_columns(caplog):
    M = np.zeros((3, 2))
    M[:, 1] = [0.0, 2.0, 0.0]
    with caplog.at_level(logging.WARNING, logger="semnet.dictionary"):
        P = project_oblique(M, np.zeros((3, 2)))
    np.testing.assert_array_equal(P[:, 0], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(P[:, 1], [0.0, 1.0, 0.0])
    assert any("zero column" in r.message for r in caplog.records)


# ---------------------------------------------------------------------------
# Block updates


def test_update_codes_matches_stacked_least_squares():
    # The update solves the ridge system (D^T D + rho I) C = rhs, which is
    # the normal equation of an augmented least-squares problem; solve
    # that problem independently via SVD and compare.
    rng = np.random.default_rng(6)
    X = _network(rng, d=4, n=6, V=3)
    config = LearnConfig(gamma=0.2, rho=0.7, budgets=2, seed=1)
    state = init_state(X, config)
    for agent in range(3):
        C = update_codes(state, X, agent)
        target = state.Z[agent] - state.U[agent]
        A = np.vstack([state.D, np.sqrt(state.rho) * np.eye(4)])
        B = np.vstack([X.block(agent), np.sqrt(state.rho) * target.T])
        expected, *_ = np.linalg.lstsq(A, B, rcond=None)
        np.testing.assert_allclose(C, expected, atol=1e-10)


def test_update_dictionary_without_penalty_matches_least_squares():
    rng = np.random.default_rng(7)
    X = _network(rng)
    config = LearnConfig(gamma=0.0, rho=1.3, budgets=3, seed=2)
    state = init_state(X, config)
    D_new = update_dictionary(state, X)
    target = state.P - state.R
    A = np.vstack([state.S.T, np.sqrt(state.rho) * np.eye(4)])
    B = np.vstack([X.stacked.T, np.sqrt(state.rho) * target.T])
    expected, *_ = np.linalg.lstsq(A, B, rcond=None)
    np.testing.assert_allclose(D_new, expected.T, atol=1e-10)


def test_update_dictionary_is_stationary_for_its_local_model():
    # Gradient of 0.5||X - M S||^2 + rho/2 ||M - (P - R)||^2 minus the
    # penalty's linear term must vanish at the returned refinement.
    rng = np.random.default_rng(8)
    X = _network(rng)
    config = LearnConfig(gamma=0.4, rho=0.9, budgets=3, seed=3)
    state = init_state(X, config)
    D_new = update_dictionary(state, X)
    G = state.D @ np.linalg.inv(state.D.T @ state.D)
    grad = (
        -(X.stacked - D_new @ state.S) @ state.S.T
        + state.rho * (D_new - (state.P - state.R))
        - state.gamma * G
    )
    np.testing.assert_allclose(grad, 0.0, atol=1e-9)


# ---------------------------------------------------------------------------
# Iteration mechanics


def test_init_state_is_feasible_and_seeded():
    rng = np.random.default_rng(9)
    X = _network(rng, V=3)
    config = LearnConfig(budgets=[1, 2, 3], seed=5, alpha0=0.7)
    state = init_state(X, config)
    np.testing.assert_allclose(np.linalg.norm(state.D, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(state.S, state.D.T @ X.stacked, atol=1e-12)
    np.testing.assert_array_equal(state.P, state.D)
    assert np.all(state.R == 0)
    for i, budget in enumerate([1, 2, 3]):
        assert np.all(state.U[i] == 0)
        used = np.count_nonzero(np.linalg.norm(state.Z[i], axis=0))
        assert used <= budget
    assert state.step == 0 and state.alpha == pytest.approx(0.7)
    assert state.residuals.primal_dict == 0.0
    assert np.isinf(state.residuals.dual_dict)
    again = init_state(X, config)
    np.testing.assert_array_equal(state.D, again.D)


def test_step_applies_smoothing_duals_and_schedule():
    rng = np.random.default_rng(10)
    X = _network(rng, V=2)
    config = LearnConfig(gamma=0.1, rho=1.1, budgets=2, seed=4, alpha0=0.6, mu=0.2)
    state = init_state(X, config)
    nxt = sca_admm_step(state, X, config)

    # Dictionary smoothing: recompute the refinement from the old state.
    D_tilde = update_dictionary(state, X)
    np.testing.assert_allclose(
        nxt.D, state.D + state.alpha * (D_tilde - state.D), atol=1e-12
    )
    # Code smoothing, agent blocks independent.
    n = X.n
    for i in range(2):
        S_tilde = update_codes(state, X, i)
        old = state.codes_block(i, n)
        np.testing.assert_allclose(
            nxt.codes_block(i, n), old + state.alpha * (S_tilde - old), atol=1e-12
        )
    # Splitting variable stays on the oblique manifold.
    np.testing.assert_allclose(np.linalg.norm(nxt.P, axis=0), 1.0, atol=1e-12)
    # Dual updates and residual bookkeeping.
    np.testing.assert_allclose(nxt.R, state.R + nxt.D - nxt.P, atol=1e-12)
    for i in range(2):
        Si_T = nxt.codes_block(i, n).T
        np.testing.assert_allclose(nxt.U[i], state.U[i] + Si_T - nxt.Z[i], atol=1e-12)
        used = np.count_nonzero(np.linalg.norm(nxt.Z[i], axis=0))
        assert used <= 2
        assert nxt.residuals.primal_codes[i] == pytest.approx(
            np.linalg.norm(Si_T - nxt.Z[i])
        )
    assert nxt.residuals.primal_dict == pytest.approx(np.linalg.norm(nxt.D - nxt.P))
    assert nxt.residuals.dual_dict == pytest.approx(
        state.rho * np.linalg.norm(nxt.P - state.P)
    )
    assert nxt.step == 1
    assert nxt.alpha == pytest.approx(config.stepsize(1))


def test_learn_dictionary_artifacts_respect_constraints():
    rng = np.random.default_rng(11)
    X = _network(rng, d=6, n=12, V=2)
    config = LearnConfig(gamma=0.05, rho=2.0, budgets=[2, 4], max_iters=150, seed=6)
    D, codes, report = learn_dictionary(X, config)
    assert D.atom_norm_violation() <= 1e-12
    assert D.gamma == 0.05
    for S, budget in zip(codes, [2, 4]):
        assert len(S.row_support()) <= budget
        assert S.budget == budget
    assert report.iterations == len(report.objective_trace)
    assert report.iterations == len(report.primal_dict_trace)
    assert report.converged == (not report.max_iters_exceeded)
    assert np.isfinite(report.final_objective)


def test_learn_dictionary_is_deterministic():
    rng = np.random.default_rng(12)
    X = _network(rng, d=5, n=8, V=2)
    config = LearnConfig(gamma=0.1, rho=1.0, budgets=3, max_iters=40, seed=7)
    D1, codes1, _ = learn_dictionary(X, config)
    D2, codes2, _ = learn_dictionary(X, config)
    np.testing.assert_array_equal(D1.atoms, D2.atoms)
    for a, b in zip(codes1, codes2):
        np.testing.assert_array_equal(a.codes, b.codes)


def test_learn_dictionary_warns_at_iteration_cap(caplog):
    rng = np.random.default_rng(13)
    X = _network(rng, d=5, n=8, V=2)
    config = LearnConfig(gamma=0.1, rho=1.0, budgets=2, max_iters=3, seed=8)
    with caplog.at_level(logging.WARNING, logger="semnet.dictionary"):
        _, _, report = learn_dictionary(X, config)
    assert not report.converged
    assert report.max_iters_exceeded
    assert report.iterations == 3
    assert any("max_iters" in r.message for r in caplog.records)
