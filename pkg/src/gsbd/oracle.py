"""Ground-truth references.

Exhaustive subset search with a duality-gap certificate per subset, an
independent projected-gradient solver for the priced inner problem, and a
high-precision golden-section check of the waterfilling rule. These exist
to validate the fast path, so they favor auditability over speed.
"""

from dataclasses import dataclass
from itertools import combinations
import math

import mpmath as mp
import numpy as np

from . import bd

__all__ = [
    "SubsetResult", "FeasibilityError", "restrict_channels",
    "subset_feasible", "solve_fixed_subset", "exhaustive_search",
    "projected_gradient_reference", "golden_section_waterfill",
]

EXHAUSTIVE_L_CAP = 14


class FeasibilityError(ValueError):
    pass


@dataclass(frozen=True)
class SubsetResult:
    """Best certified solution found on one RAP subset.

    rate is a feasible (achievable) value; upper is the matching dual bound,
    so the subset's true optimum lies in [rate, upper].
    """

    subset: tuple
    rate: float
    upper: float
    feasible: bool
    iters: int


def restrict_channels(H, subset, n_c):
    """Channel columns of the chosen RAPs, order preserved."""
    idx = np.concatenate([np.arange(l * n_c, (l + 1) * n_c) for l in subset])
    return np.asarray(H)[:, :, idx]


def subset_feasible(a, n_c, K, N):
    """BD dimension checks for an active set of a RAPs."""
    a_min = math.ceil(K * N / n_c)
    return a * n_c >= a_min * n_c and a * n_c - N * (K - 1) >= N


def _feasible_rate(H, Ts, scale, sigma2):
    """Exact sum rate after scaling the precoders into the budgets."""
    total = 0.0
    for k in range(len(Ts)):
        G = H[k] @ Ts[k]
        A = np.eye(G.shape[0]) + (scale / sigma2) * (G @ G.conj().T)
        total += np.linalg.slogdet((A + A.conj().T) / 2)[1] / bd.LN2
    return float(total)


def solve_fixed_subset(H, subset, n_c, budgets=None, sigma2=1.0,
                       rel_gap=5e-4, max_iter=2000, step0=0.5,
                       slack_clip=10.0) -> SubsetResult:
    """Max sum rate on one RAP subset under per-RAP budgets.

    Runs the dual of the unpenalized problem on the restricted channel and
    keeps a bracket around the optimum: every dual value rate + lam.slack
    upper-bounds it, every budget-scaled iterate lower-bounds it. The step
    is halved whenever 20 iterations fail to shrink the bracket by 30%.
    """
    K, N, _ = np.asarray(H).shape
    subset = tuple(subset)
    if not subset_feasible(len(subset), n_c, K, N):
        raise FeasibilityError(
            f"subset of {len(subset)} RAPs cannot carry {K} users x {N} streams")
    Hs = restrict_channels(H, subset, n_c)
    L = len(subset)
    budgets = np.ones(L) if budgets is None else np.asarray(budgets, float)
    basis = bd.compute_null_basis(Hs)
    lam = np.ones(L)
    step = step0
    lo, hi, ckpt = 0.0, np.inf, np.inf
    t_used = max_iter
    for t in range(1, max_iter + 1):
        omega_diag = np.repeat(lam, n_c)
        Ts, rate, omega = _ts_rate_powers(Hs, basis, omega_diag, n_c, sigma2)
        slack = budgets - omega
        hi = min(hi, rate + float(lam @ slack))
        pos = omega > 0
        c = min(1.0, float(np.min(budgets[pos] / omega[pos]))) if np.any(pos) else 1.0
        lo = max(lo, _feasible_rate(Hs, Ts, c, sigma2))
        if hi - lo <= rel_gap * max(hi, 1e-12):
            t_used = t
            break
        if t % 20 == 0:
            if hi - lo > 0.7 * ckpt:
                step *= 0.5
            ckpt = hi - lo
        upd = np.maximum(slack, -slack_clip * budgets)
        lam = np.maximum(lam - step * upd, 0.0)
    return SubsetResult(subset=subset, rate=lo, upper=hi, feasible=True,
                        iters=t_used)


def _ts_rate_powers(Hs, basis, omega_diag, n_c, sigma2):
    M = Hs.shape[2]
    diag = np.zeros(M)
    rate = 0.0
    Ts = []
    for k in range(Hs.shape[0]):
        eff = bd.effective_channel(Hs[k], basis.V[k], omega_diag)
        lt = bd.waterfill_dual(eff.xi, sigma2)
        T = basis.V[k] @ (eff.W_inv_half @ (eff.V_hat * np.sqrt(lt)))
        Ts.append(T)
        diag += np.sum(np.abs(T) ** 2, axis=1)
        rate += float(np.sum(np.log2(1.0 + eff.xi ** 2 * lt / sigma2)))
    return Ts, rate, diag.reshape(-1, n_c).sum(axis=1)


def exhaustive_search(H, n_c, budgets=None, sigma2=1.0, size=None,
                      rel_gap=5e-4):
    """Best certified subset per cardinality by plain enumeration.

    size restricts the search to one cardinality; otherwise every
    BD-feasible size is covered. Ties go to the lexicographically smallest
    subset. Refuses L beyond the combinatorial cap.
    """
    H = np.asarray(H)
    K, N, M = H.shape
    L = M // n_c
    if L > EXHAUSTIVE_L_CAP:
        raise ValueError(
            f"exhaustive search over L={L} RAPs exceeds the cap of "
            f"{EXHAUSTIVE_L_CAP}; restrict the instance")
    sizes = [size] if size is not None else list(range(1, L + 1))
    best = {}
    for a in sizes:
        if not subset_feasible(a, n_c, K, N):
            continue
        for sub in combinations(range(L), a):
            b = budgets if budgets is None else np.asarray(budgets, float)[list(sub)]
            res = solve_fixed_subset(H, sub, n_c, budgets=b, sigma2=sigma2,
                                     rel_gap=rel_gap)
            # strict > keeps the first (lexicographically smallest) on ties
            if a not in best or res.rate > best[a].rate:
                best[a] = res
    return best


def projected_gradient_reference(HV, W, sigma2=1.0, tol=1e-12,
                                 max_iter=200_000):
    """Gradient ascent with PSD projection for the priced rate problem.

    Maximizes log2 det(I + HV Q HV^/sigma2) - Tr(W Q) over Q >= 0 by
    projected ascent with backtracking; the step regrows after each
    success. Returns (Q, objective). Used only to validate the closed form.
    """
    n = HV.shape[0]
    d = W.shape[0]

    def f(Q):
        A = np.eye(n) + (HV @ Q @ HV.conj().T) / sigma2
        return np.linalg.slogdet((A + A.conj().T) / 2)[1] / bd.LN2 \
            - float(np.trace(W @ Q).real)

    def proj(Q):
        w, U = np.linalg.eigh((Q + Q.conj().T) / 2)
        return (U * np.maximum(w, 0.0)) @ U.conj().T

    Q = np.zeros((d, d), dtype=complex)
    obj = f(Q)
    alpha = 1.0
    for _ in range(max_iter):
        A = np.eye(n) + (HV @ Q @ HV.conj().T) / sigma2
        G = HV.conj().T @ np.linalg.solve((A + A.conj().T) / 2, HV) \
            / (sigma2 * bd.LN2) - W
        G = (G + G.conj().T) / 2
        while True:
            Qn = proj(Q + alpha * G)
            on = f(Qn)
            if on > obj or alpha < 1e-18:
                break
            alpha *= 0.5
        if on <= obj + tol:
            break
        Q, obj = Qn, on
        alpha *= 1.3
    return Q, obj


def golden_section_waterfill(xi2, sigma2, dps=50, span=4.0, iters=200):
    """Per-mode argmax of log2(1 + xi2 q / sigma2) - q by golden section.

    Runs in mpmath arithmetic so the comparison against the closed form is
    meaningful at 1e-8. Returns float argmaxes, one per mode.
    """
    out = []
    with mp.workdps(dps):
        phi = (mp.sqrt(5) - 1) / 2
        for x2 in np.atleast_1d(xi2):
            if x2 <= 0:
                out.append(0.0)
                continue
            g = lambda q: mp.log(1 + mp.mpf(x2) * q / mp.mpf(sigma2), 2) - q
            a, b = mp.mpf(0), mp.mpf(span)
            c1, c2 = b - phi * (b - a), a + phi * (b - a)
            g1, g2 = g(c1), g(c2)
            for _ in range(iters):
                if g1 < g2:
                    a, c1, g1 = c1, c2, g2
                    c2 = a + phi * (b - a)
                    g2 = g(c2)
                else:
                    b, c2, g2 = c2, c1, g1
                    c1 = b - phi * (b - a)
                    g1 = g(c1)
            out.append(float((a + b) / 2))
    return np.array(out)
