"""End-to-end acceptance checks, one per advertised capability.

Each test exercises a capability against an independent oracle
(exhaustive search, dense grids, finite differences, planted ground
truth) at a fixed tolerance and wall-clock limit, and prints a single
pass/fail line. Randomized checks draw every instance from seeded
generators so reruns are bit-for-bit identical.
"""

import filecmp
import itertools
import json
import os
import time

import numpy as np

from semnet import (
    LearnConfig,
    SyntheticSpec,
    Threshold,
    average_accuracy,
    build_coboundary,
    build_sheaf_laplacian,
    edge_loss,
    edge_loss_stats,
    evenly_split_families,
    generate,
    global_section_dim,
    learn_dictionary,
    learn_sheaf,
    procrustes_align,
    split_columns,
    threshold_sweep,
    total_variation,
    validate_network,
)
from semnet.core import ConnectionSheaf
from semnet.dictionary import objective_p2, prox_group_20, surrogate_objective


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"criterion {num} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def _haar_orthogonal(rng, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diagonal(R))


def _spearman(x, y) -> float:
    """Spearman correlation with average ranks for ties."""

    def ranks(a):
        a = np.asarray(a, dtype=float)
        order = np.argsort(a, kind="stable")
        r = np.empty_like(a)
        i = 0
        while i < len(a):
            j = i
            while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
                j += 1
            r[order[i : j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        return r

    rx, ry = ranks(x), ranks(y)
    sx, sy = rx - rx.mean(), ry - ry.mean()
    den = np.sqrt((sx**2).sum() * (sy**2).sum())
    return float((sx * sy).sum() / den) if den > 0 else 0.0


def test_criterion_1_row_budget_prox_matches_exhaustive_search():
    """Budgeted projection equals brute-force best column subset."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        rows = int(rng.integers(1, 7))
        cols = int(rng.integers(1, 9))
        Y = rng.standard_normal((rows, cols))
        col_sq = np.linalg.norm(Y, axis=0) ** 2
        for budget in range(1, cols + 1):
            Z = prox_group_20(Y, budget)
            assert int(np.count_nonzero(np.linalg.norm(Z, axis=0))) <= budget
            got = float(np.linalg.norm(Y - Z) ** 2)
            best = min(
                float(col_sq.sum() - col_sq[list(keep)].sum())
                for keep in itertools.combinations(range(cols), budget)
            )
            worst = max(worst, abs(got - best))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    _report(1, "budget projection vs exhaustive subsets",
            ok, f"max gap {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 5.0


def test_criterion_2_procrustes_beats_planar_grid_and_recovers_planted_maps():
    """SVD alignment at least matches a dense O(2) grid and inverts
    exactly planted orthogonal maps."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(23)
    thetas = np.arange(720) * (2.0 * np.pi / 720.0)
    cos, sin = np.cos(thetas), np.sin(thetas)
    # All 720 rotations and 720 reflections of the plane.
    grid = np.concatenate(
        [
            np.stack([np.stack([cos, -sin], -1), np.stack([sin, cos], -1)], 1),
            np.stack([np.stack([cos, sin], -1), np.stack([sin, -cos], -1)], 1),
        ]
    )
    worst_gap, worst_orth = -np.inf, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 11))
        A_u = rng.standard_normal((2, n))
        A_v = rng.standard_normal((2, n))
        O = procrustes_align(A_u, A_v)
        worst_orth = max(worst_orth, float(np.linalg.norm(O.T @ O - np.eye(2))))
        raw, _ = edge_loss(O, A_u, A_v)
        grid_best = float(
            (np.linalg.norm(grid @ A_u - A_v[None], axis=(1, 2)) ** 2).min()
        )
        worst_gap = max(worst_gap, raw - grid_best)
    worst_recovery = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 9))
        Q = _haar_orthogonal(rng, d)
        if rng.integers(2):
            Q[0] = -Q[0]  # cover the reflection component too
        A_u = rng.standard_normal((d, d + 5))
        O = procrustes_align(A_u, Q @ A_u)
        worst_orth = max(worst_orth, float(np.linalg.norm(O.T @ O - np.eye(d))))
        worst_recovery = max(worst_recovery, float(np.linalg.norm(O - Q)))
    elapsed = time.perf_counter() - t0
    ok = (worst_gap <= 1e-3 and worst_orth <= 1e-10
          and worst_recovery <= 1e-6 and elapsed < 10.0)
    _report(2, "orthogonal alignment vs grid / planted maps", ok,
            f"grid gap {worst_gap:.2e}, orth {worst_orth:.2e}, "
            f"recovery {worst_recovery:.2e}, {elapsed:.2f}s")
    assert worst_gap <= 1e-3
    assert worst_orth <= 1e-10
    assert worst_recovery <= 1e-6
    assert elapsed < 10.0


def test_criterion_3_laplacian_identities_and_tree_sections():
    """L = delta^T delta, TV = edge sum, spectrum >= 0, and any tree of
    orthogonal maps carries a full d-dimensional section space."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(37)
    worst_factor, worst_tv, worst_neg = 0.0, 0.0, 0.0
    tree_dims_ok = True
    for _ in range(100):
        V = int(rng.integers(2, 7))
        d = int(rng.integers(1, 9))
        pairs = [(u, v) for u in range(V) for v in range(u + 1, V)
                 if rng.random() < 0.5]
        maps = {e: _haar_orthogonal(rng, d) for e in pairs}
        sheaf = ConnectionSheaf(
            num_nodes=V, d=d, edges=tuple(pairs), maps=maps,
            edge_losses={e: (0.0, 0.0) for e in pairs},
        )
        delta = build_coboundary(sheaf)
        L = build_sheaf_laplacian(sheaf)
        worst_factor = max(
            worst_factor, float(np.abs(L.matrix - delta.T @ delta).max())
        )
        X = rng.standard_normal((V * d, 3))
        tv = total_variation(L, X)
        edge_sum = sum(
            float(np.linalg.norm(
                maps[(u, v)] @ X[u * d:(u + 1) * d] - X[v * d:(v + 1) * d]
            ) ** 2)
            for (u, v) in pairs
        )
        denom = max(edge_sum, 1e-300)
        worst_tv = max(worst_tv, abs(tv - edge_sum) / denom)
        evals = np.linalg.eigvalsh(L.matrix)
        spec_norm = float(max(abs(evals[0]), abs(evals[-1])))
        worst_neg = max(worst_neg, float(-evals[0]) - 1e-8 * spec_norm)

        # Random tree: attach each node to an earlier one. No cycles, so
        # any orthogonal maps are simultaneously satisfiable.
        tree_edges = [(int(rng.integers(0, v)), v) for v in range(1, V)]
        tree = ConnectionSheaf(
            num_nodes=V, d=d, edges=tuple(tree_edges),
            maps={e: _haar_orthogonal(rng, d) for e in tree_edges},
            edge_losses={e: (0.0, 0.0) for e in tree_edges},
        )
        if global_section_dim(build_sheaf_laplacian(tree)) != d:
            tree_dims_ok = False
    elapsed = time.perf_counter() - t0
    ok = (worst_factor <= 1e-12 and worst_tv <= 1e-8 and worst_neg <= 0.0
          and tree_dims_ok and elapsed < 30.0)
    _report(3, "Laplacian factorization / variation / kernel", ok,
            f"factor {worst_factor:.2e}, tv rel {worst_tv:.2e}, "
            f"tree dims {'ok' if tree_dims_ok else 'bad'}, {elapsed:.2f}s")
    assert worst_factor <= 1e-12
    assert worst_tv <= 1e-8
    assert worst_neg <= 0.0
    assert tree_dims_ok
    assert elapsed < 30.0


def test_criterion_4_surrogate_gradients_match_objective_at_anchor():
    """Finite-difference gradients of the local model and of the true
    objective agree at the anchor in both blocks."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(41)
    d, n, V, gamma, h = 4, 10, 2, 0.1, 1e-6

    def fd_grad(f, P):
        g = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            e = np.zeros_like(P)
            e[idx] = h
            g[idx] = (f(P + e) - f(P - e)) / (2.0 * h)
        return g

    worst = 0.0
    for _ in range(20):
        # Keep the Gramian well conditioned so logdet is smooth here.
        D = _haar_orthogonal(rng, d) * rng.uniform(0.5, 1.5, size=d)
        S = rng.standard_normal((d, n * V))
        X = rng.standard_normal((d, n * V))
        gD_true = fd_grad(lambda M: objective_p2(M, S, X, gamma), D)
        gD_model = fd_grad(
            lambda M: surrogate_objective(M, S, D, S, X, gamma), D
        )
        gS_true = fd_grad(lambda C: objective_p2(D, C, X, gamma), S)
        gS_model = fd_grad(
            lambda C: surrogate_objective(D, C, D, S, X, gamma), S
        )
        rel_D = np.linalg.norm(gD_true - gD_model) / np.linalg.norm(gD_true)
        rel_S = np.linalg.norm(gS_true - gS_model) / np.linalg.norm(gS_true)
        worst = max(worst, float(rel_D), float(rel_S))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30.0
    _report(4, "anchor gradients of model vs objective", ok,
            f"max rel diff {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-4
    assert elapsed < 30.0


def test_criterion_5_planted_dictionary_recovery():
    """Noiseless planted instance: the solver reaches machine-level fit,
    unit atoms, the planted per-agent supports, and its own stopping
    rule within the iteration cap."""
    from scipy.optimize import linear_sum_assignment

    t0 = time.perf_counter()
    spec = SyntheticSpec(
        num_agents=4, families=evenly_split_families(4, 4),
        d=16, n=256, num_classes=16, support_size=4,
        within_family_noise=1.0, between_family_divergence=1.0,
        noise_sigma=0.0, seed=3, apply_misalignment=False,
    )
    net = generate(spec)
    X = validate_network(list(net.embeddings))
    config = LearnConfig(gamma=0.01, rho=30.0, budgets=4,
                         max_iters=2000, eps_abs=1e-4, seed=26)
    D, codes, report = learn_dictionary(X, config)
    Xs = X.stacked
    S = np.hstack([c.codes for c in codes])
    rel_fit = float(np.linalg.norm(Xs - D.atoms @ S) ** 2
                    / np.linalg.norm(Xs) ** 2)
    atom_gap = float(D.atom_norm_violation())
    # Quotient by atom permutation and sign before comparing supports.
    C = np.abs(D.atoms.T @ net.true_dictionary)
    row, col = linear_sum_assignment(-C)
    to_planted = dict(zip(row, col))
    supports_ok = all(
        {to_planted[int(k)] for k in codes[v].row_support()}
        == set(net.true_supports[net.true_families[v]])
        for v in range(spec.num_agents)
    )
    elapsed = time.perf_counter() - t0
    ok = (rel_fit <= 1e-3 and atom_gap <= 1e-6 and supports_ok
          and report.converged and report.iterations <= 2000
          and elapsed < 120.0)
    _report(5, "planted dictionary recovery", ok,
            f"fit {rel_fit:.2e}, atoms {atom_gap:.1e}, supports "
            f"{'ok' if supports_ok else 'bad'}, converged {report.converged} "
            f"at {report.iterations}, {elapsed:.1f}s")
    assert rel_fit <= 1e-3
    assert atom_gap <= 1e-6
    assert supports_ok
    assert report.converged and report.iterations <= 2000
    assert elapsed < 120.0


def _best_fit_denoise(X, budget, seeds, max_iters=600):
    """Dictionary fits restarted over seeds; keep the best global fit.

    Restarts are standard for this nonconvex problem; selection uses
    only the reconstruction error, never the evaluated statistic.
    """
    best = None
    Xs = X.stacked
    for s in seeds:
        config = LearnConfig(gamma=0.01, rho=10.0, budgets=budget,
                             max_iters=max_iters, eps_abs=1e-4, seed=s)
        D, codes, _ = learn_dictionary(X, config)
        S = np.hstack([c.codes for c in codes])
        fit = float(np.linalg.norm(Xs - D.atoms @ S) ** 2
                    / np.linalg.norm(Xs) ** 2)
        if best is None or fit < best[0]:
            best = (fit, D, codes)
    return best[1], best[2]


def test_criterion_6_denoised_topology_recovers_families():
    """Nine agents, three planted families, noisy embeddings: some
    threshold on denoised losses recovers the family partition, and
    denoising widens the within/between loss separation."""
    t0 = time.perf_counter()
    num_agents, num_families = 9, 3
    aris, separations = [], []
    for seed in range(10):
        spec = SyntheticSpec(
            num_agents=num_agents,
            families=evenly_split_families(num_agents, num_families),
            d=16, n=128, num_classes=8, support_size=5,
            within_family_noise=0.0, between_family_divergence=1.0,
            noise_sigma=0.05, class_mean_scale=0.05,
            seed=seed, apply_misalignment=False,
        )
        net = generate(spec)
        X = validate_network(list(net.embeddings))
        families = [net.true_families[v] for v in range(num_agents)]
        keep_all = LearnConfig(edge_rule=Threshold(float("inf")))
        baseline = edge_loss_stats(learn_sheaf(X, keep_all).candidates, families)
        D, codes = _best_fit_denoise(
            X, budget=5, seeds=[seed + 1000 * r for r in range(3)]
        )
        denoised_reps = validate_network([D.atoms @ c.codes for c in codes])
        den_sheaf = learn_sheaf(denoised_reps, keep_all)
        denoised = edge_loss_stats(den_sheaf.candidates, families)
        best_ari = max(
            rep.ari for _, rep in
            threshold_sweep(num_agents, den_sheaf.candidates, families)
        )
        aris.append(best_ari)
        separations.append((baseline.separation, denoised.separation))
    median_ari = float(np.median(aris))
    improved = sum(d > b for b, d in separations)
    elapsed = time.perf_counter() - t0
    ok = median_ari >= 0.9 and improved >= 9 and elapsed < 300.0
    _report(6, "family recovery and separation after denoising", ok,
            f"median ARI {median_ari:.3f}, separation improved "
            f"{improved}/10, {elapsed:.1f}s")
    assert median_ari >= 0.9
    assert improved >= 9
    assert elapsed < 300.0


def test_criterion_7_accuracy_tracks_budget_and_edges_track_sparsity():
    """Across row budgets 4..16: per-agent accuracy rises with budget
    (rank correlation), and tighter budgets keep at least as many edges."""
    t0 = time.perf_counter()
    num_agents, budgets, tau = 6, [4, 8, 12, 16], 0.65
    per_seed_rho, mono_count = [], 0
    for seed in range(10):
        spec = SyntheticSpec(
            num_agents=num_agents,
            families=evenly_split_families(num_agents, 2),
            d=16, n=512, num_classes=16, support_size=12,
            within_family_noise=0.5, between_family_divergence=1.0 / 3.0,
            noise_sigma=0.0, seed=seed, apply_misalignment=False,
        )
        net = generate(spec)
        X = validate_network(list(net.embeddings))
        train_idx, test_idx = split_columns(spec.n, seed, 0.8)
        per_agent = {v: [] for v in range(num_agents)}
        counts = []
        for budget in budgets:
            D, codes = _best_fit_denoise(
                X, budget=budget, seeds=[seed + 1000 * r for r in range(2)]
            )
            reps = validate_network([D.atoms @ c.codes for c in codes])
            sheaf = learn_sheaf(reps, LearnConfig(edge_rule=Threshold(tau)))
            acc = average_accuracy(sheaf, D, codes, net.labels,
                                   train_idx, test_idx)
            for v in range(num_agents):
                per_agent[v].append(acc.per_agent[v])
            counts.append(sheaf.num_edges)
        rhos = [
            0.0 if any(a is None for a in vals) else _spearman(budgets, vals)
            for vals in per_agent.values()
        ]
        per_seed_rho.append(float(np.median(rhos)))
        mono_count += all(counts[i] >= counts[i + 1] for i in range(3))
    median_rho = float(np.median(per_seed_rho))
    elapsed = time.perf_counter() - t0
    ok = median_rho >= 0.8 and mono_count >= 7 and elapsed < 300.0
    _report(7, "accuracy vs budget / edge count vs sparsity", ok,
            f"median rho {median_rho:.3f}, edge monotone {mono_count}/10, "
            f"{elapsed:.1f}s")
    assert median_rho >= 0.8
    assert mono_count >= 7
    assert elapsed < 300.0


def test_criterion_8_pipeline_is_bit_reproducible(tmp_path):
    """Running the full pipeline twice from one spec produces artifact
    trees that are byte-for-byte identical."""
    from semnet.cli import main as cli_main

    t0 = time.perf_counter()
    spec = {
        "num_agents": 3,
        "families": [[0], [1], [2]],
        "d": 12,
        "n": 32,
        "num_classes": 4,
        "support_size": 3,
        "within_family_noise": 0.5,
        "between_family_divergence": 1.0,
        "noise_sigma": 0.1,
        "seed": 7,
    }
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(spec))
    outs = [tmp_path / "run_a", tmp_path / "run_b"]
    for out in outs:
        code = cli_main([
            "pipeline", "--spec", str(spec_file), "--out", str(out),
            "--budget", "3", "--max-iters", "50",
            "--gamma", "0.01", "--rho", "10.0",
        ])
        assert code == 0

    def tree(root):
        found = {}
        for base, _, names in os.walk(root):
            for name in names:
                path = os.path.join(base, name)
                found[os.path.relpath(path, root)] = path
        return found

    tree_a, tree_b = tree(outs[0]), tree(outs[1])
    same_names = sorted(tree_a) == sorted(tree_b)
    diffs = [
        rel for rel in sorted(tree_a)
        if same_names and not filecmp.cmp(tree_a[rel], tree_b[rel], shallow=False)
    ]
    elapsed = time.perf_counter() - t0
    ok = same_names and not diffs and elapsed < 60.0
    _report(8, "pipeline reproducibility", ok,
            f"{len(tree_a)} artifacts, "
            f"{'identical' if not diffs else 'diffs: ' + ', '.join(diffs)}, "
            f"{elapsed:.1f}s")
    assert same_names
    assert not diffs
    assert elapsed < 60.0
