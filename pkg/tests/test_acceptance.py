"""Acceptance checks, one test per criterion.

Each test prints a single pass/fail line with the measured statistic before
asserting, so the run log reads as a checklist. Random instances are
seed-pinned so the suite is reproducible.
"""

import time
from dataclasses import replace

import numpy as np

from gsbd import bd, oracle, solver
from gsbd.cli import ExperimentConfig, bench_scaling, eta_for_target_active
from gsbd.model import SystemConfig, realization
from gsbd.solver import SolverParams, solve

DEFAULT_DIMS = SystemConfig()  # L=10, n_c=2, K=2, N=3, 1 km disc
DESK_DIMS = SystemConfig(L=8, n_c=2, K=2, N=2)


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


def test_criterion_1_oracle_equivalence():
    # solver rate vs certified exhaustive bound at the solver's own
    # cardinality, 30 desk-scale instances, under the 10 minute budget
    t0 = time.time()
    etas = (0.05, 0.1, 0.2, 0.4, 0.8)
    a_min = 2
    ratios = []
    for i in range(6):
        for j in range(5):
            chan = realization(DESK_DIMS, i, j)
            achieved = {}
            for eta in etas:
                sol, _ = solve(chan, SolverParams(eta=eta, step0=0.1))
                a = len(sol.active_set)
                if sol.converged and a > 0:
                    achieved[a] = max(achieved.get(a, 0.0), sol.sum_rate)
                if sol.converged and a <= a_min:
                    break
            best = oracle.exhaustive_search(chan.H, 2,
                                            budgets=DESK_DIMS.budgets)
            ratios.extend(rate / best[a].upper
                          for a, rate in achieved.items() if a in best)
    elapsed = time.time() - t0
    mean_ratio = float(np.mean(ratios))
    ok = mean_ratio >= 0.98 and elapsed < 600
    _report(1, ok, f"mean ratio {mean_ratio:.4f} over {len(ratios)} "
                   f"matched-cardinality points, min {min(ratios):.4f}, "
                   f"{elapsed:.0f}s")


def test_criterion_2_penalty_reaches_minimum_cardinality():
    # a per-instance penalty sweep should bottom out at ceil(KN/n_c) = 3
    target = int(np.ceil(DEFAULT_DIMS.K * DEFAULT_DIMS.N / DEFAULT_DIMS.n_c))
    hits = 0
    n = 0
    for i in range(4):
        for j in range(5):
            chan = realization(DEFAULT_DIMS, i, j)
            eta, sol = eta_for_target_active(chan, target,
                                             SolverParams(step0=0.1))
            n += 1
            if eta is not None:
                hits += 1
    frac = hits / n
    _report(2, frac >= 0.8, f"|A|={target} reached on {hits}/{n} instances")


def test_criterion_3_unpenalized_runs_keep_everything_on():
    params = SolverParams(eta=0.0, step0=0.1, tol=1e-7, max_iter=4000)
    n_conv = 0
    worst = 0.0
    all_on = True
    for i in range(4):
        for j in range(5):
            sol, _ = solve(realization(DEFAULT_DIMS, i, j), params)
            if not sol.converged:
                continue
            n_conv += 1
            all_on &= len(sol.active_set) == DEFAULT_DIMS.L
            worst = max(worst, float(np.max(
                np.abs(sol.omega - DEFAULT_DIMS.budgets) / DEFAULT_DIMS.budgets)))
    ok = n_conv > 0 and all_on and worst <= 1e-3
    _report(3, ok, f"{n_conv}/20 converged, all active: {all_on}, "
                   f"worst power deviation {worst:.2e}")


def test_criterion_4_small_step_converges_within_fifty_iterations():
    # delta=0.1, tol=1e-4 at the pinned dimensions; with tight power
    # constraints the multiplier contraction typically needs ~90 iterations,
    # so this bound is expected to fail here (see README testing notes)
    params = SolverParams(eta=0.5, step0=0.1, tol=1e-4, max_iter=500)
    iters = []
    within = 0
    for i in range(4):
        for j in range(5):
            sol, state = solve(realization(DEFAULT_DIMS, i, j), params)
            iters.append(state.iter if sol.converged else np.inf)
            if sol.converged and state.iter <= 50:
                within += 1
    frac = within / len(iters)
    finite = [t for t in iters if np.isfinite(t)]
    _report(4, frac >= 0.9,
            f"{within}/{len(iters)} seeds within 50 iterations; converged "
            f"iteration counts min {min(finite):.0f} "
            f"median {np.median(finite):.0f} max {max(finite):.0f}")


def _random_instance(rng):
    while True:
        K = int(rng.integers(1, 4))
        N = int(rng.integers(1, 3))
        n_c = int(rng.integers(1, 3))
        L = int(rng.integers(1, 12 // n_c + 1))
        M = L * n_c
        if M <= 12 and M - N * (K - 1) >= N:
            break
    H = rng.standard_normal((K, N, M)) + 1j * rng.standard_normal((K, N, M))
    om = rng.uniform(0.1, 2.0, M)
    return H, om, n_c


def test_criterion_5_inner_solution_optimality():
    rng = np.random.default_rng(2026)
    worst_pga = 0.0
    worst_gold = 0.0
    for _ in range(100):
        H, om, n_c = _random_instance(rng)
        basis = bd.compute_null_basis(H)
        eff = bd.effective_channel(H[0], basis.V[0], om)
        lt = bd.waterfill_dual(eff.xi, 1.0)
        closed = float(np.sum(np.log2(1 + eff.xi ** 2 * lt)) - np.sum(lt))
        HV = H[0] @ basis.V[0]
        W = basis.V[0].conj().T @ (om[:, None] * basis.V[0])
        _, obj = oracle.projected_gradient_reference(HV, (W + W.conj().T) / 2)
        worst_pga = max(worst_pga, abs(obj - closed))
        gold = oracle.golden_section_waterfill(eff.xi ** 2, 1.0)
        worst_gold = max(worst_gold, float(np.max(np.abs(gold - lt))))
    ok = worst_pga <= 1e-6 and worst_gold <= 1e-8
    _report(5, ok, f"worst gradient-reference gap {worst_pga:.2e}, "
                   f"worst golden-section gap {worst_gold:.2e}")


def test_criterion_6_structural_invariants():
    checked = 0
    ok = True
    notes = []
    for eta in (0.1, 0.5):
        params = SolverParams(eta=eta, step0=0.1)
        for i in range(5):
            for j in range(4):
                chan = realization(DEFAULT_DIMS, i, j)
                sol, state = solve(chan, params)
                if not sol.converged:
                    continue
                checked += 1
                K = DEFAULT_DIMS.K
                for k in range(K):
                    nrm = np.linalg.norm(sol.T[k])
                    if nrm == 0:
                        continue
                    for m in range(K):
                        if m == k:
                            continue
                        leak = np.linalg.norm(chan.H[m] @ sol.T[k]) / (
                            np.linalg.norm(chan.H[m]) * nrm)
                        if leak > 1e-8:
                            ok = False
                            notes.append(f"ZF leak {leak:.1e}")
                    wmin = float(np.linalg.eigvalsh(sol.S[k])[0])
                    if wmin < -1e-9 * max(1.0, np.linalg.norm(sol.S[k], 2)):
                        ok = False
                        notes.append(f"eig {wmin:.1e}")
                if np.any(sol.omega > DEFAULT_DIMS.budgets * (1 + 1e-4)):
                    ok = False
                    notes.append("power over budget")
                if state.residual_history[-1] >= params.tol:
                    ok = False
                    notes.append("residual at tol")
                r_zf = sol.sum_rate
                r_full = bd.rate_with_interference(chan.H, sol.S, 1.0)
                if abs(r_zf - r_full) > 1e-8 * abs(r_zf):
                    ok = False
                    notes.append("rate forms disagree")
    detail = f"{checked} converged solutions clean"
    if notes:
        detail = f"violations: {notes[:4]}"
    _report(6, ok and checked >= 30, detail)


def test_criterion_7_restriction_embedding_equivalence():
    cfg = SystemConfig(L=6, n_c=2, K=2, N=2)
    rng = np.random.default_rng(7)
    worst = 0.0
    for t in range(50):
        chan = realization(cfg, t % 8, t // 8)
        a = int(rng.integers(2, 6))
        sub = tuple(sorted(rng.choice(6, size=a, replace=False).tolist()))
        lam = rng.uniform(0.5, 1.5, 6)

        Hs = oracle.restrict_channels(chan.H, sub, 2)
        basis_s = bd.compute_null_basis(Hs)
        S_s, _ = solver.inner_solve(Hs, basis_s, np.zeros(2 * a),
                                    lam[list(sub)], 2)
        r_restricted = bd.sum_rate(Hs, S_s, 1.0)

        S_pad = [bd.embed_covariance(Sk, sub, 2, 12) for Sk in S_s]
        r_padded = bd.sum_rate(chan.H, S_pad, 1.0)

        idx = np.concatenate([np.arange(2 * l, 2 * l + 2) for l in sub])
        Hz = chan.H.copy()
        mask = np.ones(12, bool)
        mask[idx] = False
        Hz[:, :, mask] = 0
        S_z, _ = solver.inner_solve(Hz, bd.compute_null_basis(Hz),
                                    np.zeros(12), lam, 2)
        r_zeroed = bd.sum_rate(Hz, S_z, 1.0)

        ref = max(abs(r_restricted), 1e-12)
        worst = max(worst, abs(r_padded - r_restricted) / ref,
                    abs(r_zeroed - r_restricted) / ref)
    _report(7, worst <= 1e-6, f"worst relative mismatch {worst:.2e} "
                              f"over 50 subset/instance pairs")


def test_criterion_8_selection_beats_fixed_deployment():
    target = 6
    sel = []
    fixed = []
    for i in range(8):
        for j in range(4):
            chan = realization(DEFAULT_DIMS, i, j)
            eta, sol = eta_for_target_active(chan, target,
                                             SolverParams(step0=0.1))
            if eta is None:
                continue  # this instance never lands on the cardinality
            sel.append(sol.sum_rate)
            fixed.append(oracle.solve_fixed_subset(
                chan.H, tuple(range(target)), DEFAULT_DIMS.n_c,
                budgets=DEFAULT_DIMS.budgets[:target]).rate)
    gap = float(np.mean(sel) - np.mean(fixed))
    ok = len(sel) >= 30 and gap > 0
    _report(8, ok, f"mean gap {gap:+.2f} bit/s/Hz over {len(sel)} instances "
                   f"(selection {np.mean(sel):.2f} vs fixed "
                   f"{np.mean(fixed):.2f})")


def test_criterion_9_per_iteration_cost_scaling():
    cfg = ExperimentConfig(
        system=SystemConfig(L=8, n_c=8, K=2, N=2),
        solver=SolverParams(eta=0.0, step0=0.1),
        bench_l_grid=(8, 16, 32, 64), bench_max_iter=25, bench_reps=3)
    rows, slope = bench_scaling(cfg)
    times = {r[0]: r[1] for r in rows}
    ok = 2.5 <= slope <= 4.5
    _report(9, ok, f"log-log slope {slope:.2f}; per-iteration seconds "
                   + ", ".join(f"L={r[0]}: {r[1]:.2e}" for r in rows))
