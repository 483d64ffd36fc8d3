"""Reweighted group-sparse precoding loop.

Outer loop per iteration: refresh the reweighting weights from the previous
per-RAP powers, assemble the antenna price matrix, solve the inner concave
problem in closed form, then take a projected subgradient step on the
per-RAP multipliers. Stops when the complementary-slackness residual falls
below tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from . import bd
from .model import ChannelRealization

__all__ = [
    "SolverParams", "DualState", "PrecoderSolution",
    "update_weights", "build_psi", "inner_solve", "subgradient_step",
    "slackness_residual", "extract_active_set", "solve",
]


@dataclass(frozen=True)
class SolverParams:
    """Knobs of the sparse solver.

    eta trades sum rate against the number of active RAPs. step_rule is
    "constant" (delta_t = step0) or "diminishing" (delta_t = step0/t).
    slack_clip bounds how far a single violated budget can yank its
    multiplier in one step (in budget units); the stopping residual always
    uses the unclipped slack.
    """

    eta: float = 0.0
    epsilon_w: float = 1e-6
    step0: float = 0.1
    step_rule: str = "constant"
    tol: float = 1e-4
    max_iter: int = 500
    active_thresh_rel: float = 1e-5
    lambda0: float = 1.0
    slack_clip: float = 10.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.epsilon_w <= 0 or self.step0 <= 0 or self.tol <= 0:
            raise ValueError("epsilon_w, step0 and tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.active_thresh_rel < 1:
            raise ValueError("active_thresh_rel must lie in (0, 1)")
        if np.any(np.asarray(self.lambda0) <= 0):
            raise ValueError("lambda0 must be positive")
        if self.step_rule not in ("constant", "diminishing"):
            raise ValueError("step_rule must be 'constant' or 'diminishing'")


@dataclass
class DualState:
    """Multipliers, weights and histories of one solve run."""

    lam: np.ndarray
    beta: np.ndarray
    psi_diag: np.ndarray
    iter: int
    residual_history: list = field(default_factory=list)
    active_count_history: list = field(default_factory=list)


@dataclass(frozen=True)
class PrecoderSolution:
    """Covariances, precoders and summary figures of a solved instance."""

    S: tuple
    T: tuple
    omega: np.ndarray
    active_set: tuple
    sum_rate: float
    objective: float
    eta: float
    converged: bool


def update_weights(omega_prev, epsilon_w):
    """beta_l = 1/(omega_l + eps): cheap RAPs get pricier as they fade."""
    omega_prev = np.asarray(omega_prev, dtype=float)
    if np.any(omega_prev < 0):
        raise ValueError("powers must be nonnegative")
    return 1.0 / (omega_prev + epsilon_w)


def build_psi(eta, beta, n_c):
    """Diagonal of Psi: eta * beta_l replicated over RAP l's antennas."""
    return eta * np.repeat(np.asarray(beta, dtype=float), n_c)


def subgradient_step(lam, omega, budgets, delta_t, slack_clip=10.0):
    """Projected multiplier update lam <- max(lam - delta*(budget - omega), 0).

    The slack is floored at -slack_clip*budgets so one near-free RAP cannot
    catapult its multiplier out of recovery range.
    """
    slack = np.maximum(budgets - omega, -slack_clip * np.asarray(budgets))
    return np.maximum(lam - delta_t * slack, 0.0)


def slackness_residual(lam, omega, budgets):
    """sum_l |lam_l (budget_l - omega_l)|^2; zero iff slackness holds."""
    return float(np.sum((lam * (budgets - omega)) ** 2))


def extract_active_set(omega, budgets, active_thresh_rel=1e-5):
    """RAPs transmitting at least the relative threshold of their budget."""
    omega = np.asarray(omega)
    return tuple(np.nonzero(omega >= active_thresh_rel * np.asarray(budgets))[0])


def inner_solve(H, basis, psi_diag, lam, n_c, sigma2=1.0):
    """Closed-form maximizer of the priced rate for fixed multipliers.

    Returns (covariances, per-RAP powers). Chains whitening, reduced SVD
    and waterfilling per user; users decouple for a common price matrix.
    """
    omega_diag = np.asarray(psi_diag, dtype=float) + np.repeat(
        np.asarray(lam, dtype=float), n_c)
    S = []
    for k in range(H.shape[0]):
        eff = bd.effective_channel(H[k], basis.V[k], omega_diag)
        lt = bd.waterfill_dual(eff.xi, sigma2)
        S.append(bd.covariance_from_dual(basis.V[k], eff, lt))
    return S, bd.per_rap_powers(S, n_c)


def _inner_light(H, basis, omega_diag, n_c, sigma2):
    """Loop-internal variant: precoders, powers and rate without forming S."""
    M = H.shape[2]
    diag = np.zeros(M)
    rate = 0.0
    Ts = []
    for k in range(H.shape[0]):
        eff = bd.effective_channel(H[k], basis.V[k], omega_diag)
        lt = bd.waterfill_dual(eff.xi, sigma2)
        T = basis.V[k] @ (eff.W_inv_half @ (eff.V_hat * np.sqrt(lt)))
        Ts.append(T)
        diag += np.sum(np.abs(T) ** 2, axis=1)
        rate += float(np.sum(np.log2(1.0 + eff.xi ** 2 * lt / sigma2)))
    return Ts, diag.reshape(-1, n_c).sum(axis=1), rate


def _sym_outer(T):
    S = T @ T.conj().T
    return (S + S.conj().T) / 2


def _finalize(H, Ts, omega, budgets, eta, sigma2, n_c, thresh, converged):
    """Feasibility polish and solution assembly.

    Dual iterates may overshoot budgets by a soft-tolerance margin; scale
    every covariance down to the tightest budget and recompute the exact
    rate, so returned solutions always satisfy the per-RAP constraints.
    """
    pos = omega > 0
    c = min(1.0, float(np.min(budgets[pos] / omega[pos]))) if np.any(pos) else 1.0
    Ts = tuple(np.sqrt(c) * T for T in Ts)
    S = tuple(_sym_outer(T) for T in Ts)
    omega = c * omega
    rate = bd.sum_rate(H, S, sigma2)
    active = extract_active_set(omega, budgets, thresh)
    return PrecoderSolution(
        S=S, T=Ts, omega=omega, active_set=active, sum_rate=rate,
        objective=rate - eta * len(active), eta=eta, converged=converged)


def solve(channels, params: SolverParams = SolverParams(), n_c=None,
          budgets=None, sigma2=None, trace=None):
    """Run the full reweighted loop on one channel realization.

    channels is a ChannelRealization (geometry metadata supplies n_c,
    budgets and the normalized noise power) or a raw (K, N, M) array, in
    which case n_c must be given. trace, if given, is called once per
    iteration with (t, lam, omega, rate, residual, n_active) where lam is
    the multiplier vector the iterate was computed from. Returns
    (PrecoderSolution, DualState); non-convergence returns the
    best-residual iterate with converged=False.
    """
    if isinstance(channels, ChannelRealization):
        H = channels.H
        n_c = channels.cfg.n_c
        budgets = channels.cfg.budgets if budgets is None else np.asarray(budgets, float)
        sigma2 = channels.cfg.sigma2 if sigma2 is None else sigma2
    else:
        H = np.asarray(channels)
        if n_c is None:
            raise ValueError("n_c is required for raw channel arrays")
    K, N, M = H.shape
    L = M // n_c
    if M != n_c * L:
        raise ValueError("M must be a multiple of n_c")
    if M - N * (K - 1) < N:
        raise ValueError("BD infeasible: M - N(K-1) < N")
    budgets = np.ones(L) if budgets is None else np.asarray(budgets, float)
    sigma2 = 1.0 if sigma2 is None else float(sigma2)

    basis = bd.compute_null_basis(H)
    lam = np.broadcast_to(np.asarray(params.lambda0, float), (L,)).copy()
    beta = np.zeros(L)
    psi_diag = np.zeros(M)
    omega_prev = budgets.copy()
    state = DualState(lam=lam, beta=beta, psi_diag=psi_diag, iter=0)
    best = (np.inf, lam.copy(), None)

    for t in range(1, params.max_iter + 1):
        beta = update_weights(omega_prev, params.epsilon_w)
        psi_diag = build_psi(params.eta, beta, n_c)
        omega_diag = psi_diag + np.repeat(lam, n_c)
        Ts, omega, rate = _inner_light(H, basis, omega_diag, n_c, sigma2)

        delta_t = params.step0 if params.step_rule == "constant" else params.step0 / t
        lam_next = subgradient_step(lam, omega, budgets, delta_t,
                                    params.slack_clip)
        r = slackness_residual(lam_next, omega, budgets)
        n_active = len(extract_active_set(omega, budgets,
                                          params.active_thresh_rel))
        state.residual_history.append(r)
        state.active_count_history.append(n_active)
        if trace is not None:
            trace(t, lam.copy(), omega.copy(), rate, r, n_active)
        if r < best[0]:
            best = (r, lam.copy(), beta.copy())
        state.lam, state.beta, state.psi_diag, state.iter = lam_next, beta, psi_diag, t
        omega_prev = omega
        lam = lam_next
        if r < params.tol:
            sol = _finalize(H, Ts, omega, budgets, params.eta, sigma2, n_c,
                            params.active_thresh_rel, converged=True)
            return sol, state

    # rebuild the smallest-residual iterate and hand it back flagged
    _, lam_b, beta_b = best
    if beta_b is None:
        beta_b = update_weights(budgets, params.epsilon_w)
    psi_b = build_psi(params.eta, beta_b, n_c)
    Ts, omega, _ = _inner_light(H, basis, psi_b + np.repeat(lam_b, n_c),
                                n_c, sigma2)
    sol = _finalize(H, Ts, omega, budgets, params.eta, sigma2, n_c,
                    params.active_thresh_rel, converged=False)
    return sol, state
