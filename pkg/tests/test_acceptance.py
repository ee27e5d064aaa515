"""The eleven acceptance criteria, at their stated tolerances.

Each test records a one-line verdict that is printed in the terminal
summary, then asserts it.
"""
import filecmp
import time

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import ACCEPTANCE, cycle2, random_weighted

from trustwebrank.cli import main as cli_main
from trustwebrank.dataset import CommunitySpec, clean, split, synthesize_community_dataset
from trustwebrank.dynamics import fixed_point_residual, polarized_configuration
from trustwebrank.evaluate import Evaluator, evaluate
from trustwebrank.graph import RandomGraphSpec, TrustGraph, generate_random_graph, strongly_connected_components
from trustwebrank.metric import (
    identity_residual,
    indirect_trust_exact,
    indirect_trust_iterative,
    indirect_trust_truncated,
    naive_recursion_demo,
    normalize_direct,
    normalize_indirect,
    walk_cutoff_for,
)
from trustwebrank.simulate import SimulationConfig, make_profiles, run, sweep


def verdict(n, ok, detail):
    ACCEPTANCE.append((n, bool(ok), detail))
    assert ok, f"criterion {n}: {detail}"


def test_criterion_01_cycle_closed_form():
    t0 = time.perf_counter()
    S = normalize_direct(cycle2())
    want = 1 / (1 - 0.8**2)
    exact = indirect_trust_exact(S, 0.8).toarray()[0, 1]
    it = indirect_trust_iterative(S, 0.8, tol=1e-12).toarray()[0, 1]
    dt = time.perf_counter() - t0
    err_e, err_i = abs(exact - want), abs(it - want)
    ok = err_e < 1e-10 and err_i < 1e-10 and dt < 1.0
    verdict(1, ok, f"|exact-1/(1-b^2)|={err_e:.1e} |iterative-1/(1-b^2)|={err_i:.1e} time={dt:.2f}s")


def solver_cases():
    """27 grid points of (n, d, beta) plus 3 seeded extra draws = 30 graphs."""
    ns, ds, bs = (10, 50, 200), (3, 7, 15), (0.1, 0.5, 0.85)
    cases = [(n, d, b) for n in ns for d in ds for b in bs]
    rng = np.random.default_rng(2024)
    cases += [(int(rng.choice(ns)), int(rng.choice(ds)), float(rng.choice(bs))) for _ in range(3)]
    # G(n, p) cannot exceed degree n - 1: d = 15 on 10 agents is the complete graph
    return [(n, min(d, n - 1), b, seed) for seed, (n, d, b) in enumerate(cases)]


@pytest.fixture(scope="module")
def solved():
    out = []
    t0 = time.perf_counter()
    for n, d, beta, seed in solver_cases():
        S = normalize_direct(random_weighted(n, d, seed), "strict")
        ex = indirect_trust_exact(S, beta)
        it = indirect_trust_iterative(S, beta, tol=1e-10)
        tr = indirect_trust_truncated(S, beta, walk_cutoff_for(beta, 1e-10))
        out.append((n, d, beta, S, ex, it, tr))
    return out, time.perf_counter() - t0


def test_criterion_02_solver_triangle(solved):
    cases, dt = solved
    gap = res = 0.0
    for n, d, beta, S, ex, it, tr in cases:
        a, b, c = ex.toarray(), it.toarray(), tr.toarray()
        gap = max(gap, np.abs(a - b).max(), np.abs(a - c).max(), np.abs(b - c).max())
        res = max(res, *(identity_residual(S, x, beta) for x in (a, b, c)))
    ok = len(cases) == 30 and gap < 1e-8 and res < 1e-8 and dt < 60
    verdict(2, ok, f"graphs={len(cases)} max_gap={gap:.1e} max_residual={res:.1e} time={dt:.1f}s")


def test_criterion_03_identity_and_bounds(solved):
    cases, _ = solved
    worst_low = worst_high = worst_dom = worst_sum = 0.0
    for n, d, beta, S, ex, it, tr in cases:
        Sd = S.toarray()
        for tt in (ex, it, tr):
            T = tt.toarray()
            worst_low = max(worst_low, -T.min())
            worst_high = max(worst_high, T.max() - 1 / (1 - beta))
            worst_dom = max(worst_dom, (Sd - T).max())
            St = normalize_indirect(tt)
            worst_sum = max(worst_sum, np.abs(St.row_sums()[~St.zero_row] - 1).max(initial=0))
        worst_sum = max(worst_sum, np.abs(S.row_sums()[~S.zero_row] - 1).max(initial=0))
    ok = worst_low <= 0 and worst_high <= 0 and worst_dom <= 0 and worst_sum < 1e-12
    verdict(3, ok, f"min_T={-worst_low:.1e} max(T-1/(1-b))={worst_high:.2e} "
                   f"max(S-T)={worst_dom:.1e} max|rowsum-1|={worst_sum:.1e}")


def primitive10():
    g = TrustGraph(10)
    for i in range(10):
        g.add_edge(i, (i + 1) % 10, 1.0).add_edge(i, (i + 2) % 10, 0.5)
    return g


def test_criterion_04_naive_recursion():
    t0 = time.perf_counter()
    S = normalize_direct(primitive10())
    # primitive: S^k > 0 for some k <= (n-1)^2 + 1
    P = np.linalg.matrix_power(S.toarray(), 82)
    primitive = bool((P > 0).all()) and len(strongly_connected_components(primitive10())) == 1
    rep = naive_recursion_demo(S, tol=1e-12, max_iter=10_000)
    below = next((k + 1 for k, v in enumerate(rep.variance_trace) if v < 1e-8), None)
    bip = naive_recursion_demo(normalize_direct(cycle2()), max_iter=10_000)
    dt = time.perf_counter() - t0
    ok = primitive and below is not None and below <= 10_000 and not bip.converged and dt < 5
    verdict(4, ok, f"primitive={primitive} variance<1e-8 at step {below} "
                   f"bipartite converged={bip.converged} ({bip.degeneracy}) time={dt:.2f}s")


def test_criterion_05_mean_field_fixed_point():
    t0 = time.perf_counter()
    pi = make_profiles(100)
    # first seeded G(100, 7) where every agent has a same-profile neighbour
    for seed in range(100):
        g = generate_random_graph(RandomGraphSpec(100, 7, seed=seed))
        src, dst = np.nonzero(g.structure_matrix().toarray())
        if (np.bincount(src[pi[src] == pi[dst]], minlength=100) > 0).all():
            break
    else:
        pytest.fail("no graph satisfies the precondition")
    T = polarized_configuration(g, pi)
    fixed, zero = [], []
    for eta in (0.0, 0.5, 1.0):
        for beta in (0.5, 0.8):
            fixed.append(fixed_point_residual(T, g, pi, eta, beta))
            zero.append(fixed_point_residual(g, None, pi, eta, beta, mode="bootstrap"))
    dt = time.perf_counter() - t0
    ok = max(fixed) < 1e-12 and min(zero) > 0.1 and dt < 5
    verdict(5, ok, f"max residual at polarized={max(fixed):.1e} min residual at zero={min(zero):.3f} "
                   f"time={dt:.2f}s")


FIG2 = SimulationConfig(n_agents=500, mean_degree=7, gamma=0.75, beta=0.8, u_thr=0.5,
                        steps=50, runs=20, seed=0)


@pytest.fixture(scope="module")
def fig2():
    t0 = time.perf_counter()
    fast = run(FIG2.replace(eta=0.25))
    slow = run(FIG2.replace(eta=0.05))
    return fast, slow, time.perf_counter() - t0


def test_criterion_06_simulation_convergence(fig2):
    fast, slow, dt = fig2
    same, cross = fast.mean_same[-1], fast.mean_cross[-1]
    t_fast, t_slow = fast.convergence_step(0.8), slow.convergence_step(0.8)
    earlier = t_fast is not None and (t_slow is None or t_fast < t_slow)
    ok = same >= 0.9 and cross <= 0.05 and earlier and dt < 600
    verdict(6, ok, f"eta=0.25: same={same:.4f} cross={cross:.4f} crosses 0.8 at t={t_fast}; "
                   f"eta=0.05 crosses at t={t_slow}; time={dt:.0f}s")


def test_criterion_07_phase_structure():
    t0 = time.perf_counter()
    degrees, etas = (3, 5, 7, 9), (0.02, 0.05, 0.1, 0.2)
    res = sweep(FIG2.replace(steps=10, runs=20), degrees, etas)
    m = np.array([[res[(float(d), e)].mean_same[10] for e in etas] for d in degrees])
    se = np.array([[res[(float(d), e)].stderr_same[10] for e in etas] for d in degrees])
    worst = np.inf
    for a in range(4):
        for b in range(3):
            # along eta at fixed d, and along d at fixed eta
            for lo, hi in (((a, b), (a, b + 1)), ((b, a), (b + 1, a))):
                slack = m[hi] - m[lo] + 2 * np.hypot(se[lo], se[hi])
                worst = min(worst, slack)
    dt = time.perf_counter() - t0
    ok = worst >= 0 and dt < 1800
    grid = " ".join(f"d={d}:" + ",".join(f"{v:.3f}" for v in row) for d, row in zip(degrees, m))
    verdict(7, ok, f"min slack (2 SE)={worst:.4f} time={dt:.0f}s  same@t10 {grid}")


def test_criterion_08_performance(fig2):
    fast, _, _ = fig2
    phi0, phi50 = fast.mean_phi[0], fast.mean_phi[-1]
    ok = phi50 >= 0.85 and phi0 == 0.0 and np.all(fast.phi[:, 0] == 0.0)
    verdict(8, ok, f"phi(t=0)={phi0} phi(t=50)={phi50:.4f}")


def co_rating_density(ds, min_common=2):
    """Share of ordered user pairs with at least ``min_common`` co-rated items."""
    users = {u: n for n, u in enumerate(ds.users.tolist())}
    items = {o: n for n, o in enumerate(ds.items.tolist())}
    B = sp.csr_matrix((np.ones(ds.n_ratings),
                       ([users[u] for u in ds.user.tolist()], [items[o] for o in ds.item.tolist()])),
                      shape=(len(users), len(items)))
    C = (B @ B.T).toarray()
    np.fill_diagonal(C, 0)
    n = len(users)
    return (C >= min_common).sum() / (n * (n - 1))


# flatter popularity and fewer ratings per user keep co-rating sparse
PLANTED = CommunitySpec(n_communities=2, users_per_community=200, items_per_community=250,
                        ratings_per_user=8, popularity_exponent=0.5, trust_out_degree=15, seed=1)


def test_criterion_09_dataset_pipeline():
    t0 = time.perf_counter()
    raw = synthesize_community_dataset(PLANTED)
    ds = clean(raw)
    again = clean(ds)
    idempotent = (np.array_equal(again.user, ds.user) and np.array_equal(again.item, ds.item)
                  and np.array_equal(again.trust, ds.trust))
    users = ds.users
    index = {u: n for n, u in enumerate(users.tolist())}
    g = TrustGraph(users.size)
    for a, b in ds.trust.tolist():
        g.add_edge(index[a], index[b], 1.0)
    connected = len(strongly_connected_components(g)) == 1
    n = users.size
    trust_density = ds.trust.shape[0] / (n * (n - 1))
    co_density = co_rating_density(ds)
    rep = evaluate(split(ds, 0.2, 0))
    dt = time.perf_counter() - t0
    catalogue = PLANTED.n_communities * PLANTED.items_per_community
    ok = (rep.coverage_tw > rep.coverage_cf and rep.overlap_tw > rep.overlap_global
          and 0 <= rep.mae_tw <= 1 and 0 <= rep.mae_cf <= 1 and idempotent and connected
          and trust_density > co_density and catalogue == 500 and dt < 300)
    verdict(9, ok, f"items={catalogue} (rated {raw.items.size}) pair density trust={trust_density:.4f} "
                   f"co-rating={co_density:.4f}; coverage TW={rep.coverage_tw:.3f} CF={rep.coverage_cf:.3f}; "
                   f"O20 TW={rep.overlap_tw:.3f} global={rep.overlap_global:.3f} CF={rep.overlap_cf:.3f}; "
                   f"MAE TW={rep.mae_tw:.3f} CF={rep.mae_cf:.3f}; idempotent={idempotent} "
                   f"scc={connected} time={dt:.0f}s")


TWO_HOP = CommunitySpec(connectors_per_community=20, trust_out_degree=3, seed=2)


def test_criterion_10_beta_sweep_mechanism():
    t0 = time.perf_counter()
    ds = clean(synthesize_community_dataset(TWO_HOP))
    diffs, shared = [], []
    for seed in range(10):
        rows = Evaluator(split(ds, 0.2, seed)).beta_sweep([0.0, 0.8])
        diffs.append(rows[1]["mae_tw"] - rows[0]["mae_tw"])
        shared.append(rows[1]["mae_tw_shared"] - rows[0]["mae_tw_shared"])
    diffs = np.array(diffs)
    mean, se = diffs.mean(), diffs.std(ddof=1) / np.sqrt(diffs.size)
    dt = time.perf_counter() - t0
    ok = mean < 0 and -mean > 2 * se and dt < 600
    verdict(10, ok, f"MAE(0.8)-MAE(0) mean={mean:.4f} se={se:.4f} "
                    f"(on records both predict: {np.mean(shared):.4f}) time={dt:.0f}s")


def test_criterion_11_cli_determinism(tmp_path):
    edges = tmp_path / "g.tsv"
    edges.write_text("0\t1\t1\n1\t0\t0.5\n1\t2\t1\n2\t0\t0.25\n")
    data = tmp_path / "data"
    assert cli_main(["synth", "--seed", "3", "--users-per-community", "60", "--out", str(data)]) == 0
    ratings, trust = str(data / "ratings.csv"), str(data / "trust.csv")
    invocations = [
        ["simulate", "--seed", "7", "--eta", "0.1,0.25", "--degree", "5", "--runs", "2",
         "--steps", "5", "--n-agents", "60"],
        ["simulate", "--seed", "7", "--runs", "2", "--steps", "3", "--n-agents", "40",
         "--format", "json", "--workers", "2"],
        ["trust", "--seed", "1", "--beta", "0.8", str(edges)],
        ["trust", "--seed", "1", "--strategy", "truncated", "--format", "json", str(edges)],
        ["evaluate", "--seed", "5", "--ratings", ratings, "--trust", trust],
        ["evaluate", "--seed", "5", "--ratings", ratings, "--trust", trust, "--format", "csv"],
        ["synth", "--seed", "9", "--users-per-community", "40"],
        ["demo-naive", "--seed", "0", "--format", "csv"],
    ]
    mismatched, n_files = [], 0
    for k, argv in enumerate(invocations):
        a, b = tmp_path / f"a{k}", tmp_path / f"b{k}"
        assert cli_main(argv + ["--out", str(a)]) == 0
        assert cli_main(argv + ["--out", str(b)]) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        n_files += len(names)
        _, bad, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        mismatched += [f"{argv[0]}:{x}" for x in bad + errors]
    ok = not mismatched and n_files > 0
    verdict(11, ok, f"{len(invocations)} invocations, {n_files} files compared, "
                    f"differing={mismatched or 'none'}")
