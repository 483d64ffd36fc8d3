"""Block-diagonalization machinery.

Null-space bases that cancel inter-user interference, the closed-form
solution of the per-user concave subproblem (whitening, reduced SVD,
waterfilling against a fixed water level), covariance recovery, and
rate/power evaluation. Everything here is a pure function of its inputs.
"""

from dataclasses import dataclass

import numpy as np

LN2 = float(np.log(2.0))
WATER_LEVEL = 1.0 / LN2

RIDGE_REL = 1e-10
DEGENERATE_REL = 1e-8

__all__ = [
    "LN2", "WATER_LEVEL", "NullBasis", "EffectiveChannel",
    "rap_slice", "selector_diag", "compute_null_basis", "effective_channel",
    "waterfill_dual", "covariance_from_dual", "sum_rate",
    "rate_with_interference", "per_rap_powers", "embed_covariance",
]


def rap_slice(l, n_c):
    """Antenna index range of RAP l inside the stacked M-antenna array."""
    return slice(l * n_c, (l + 1) * n_c)


def selector_diag(l, n_c, M):
    """Diagonal of the 0/1 matrix selecting RAP l's antennas."""
    b = np.zeros(M)
    b[rap_slice(l, n_c)] = 1.0
    return b


def _hermitize(X):
    return (X + X.conj().T) / 2.0


@dataclass(frozen=True)
class NullBasis:
    """Per-user orthonormal bases of the other-users' channel null space.

    V[k] has shape M x (M - N(K-1)). degenerate is set when the stacked
    interference channel is rank-deficient at the cut, or when a user's own
    channel is (numerically) annihilated by its basis.
    """

    V: tuple
    degenerate: bool


def compute_null_basis(H) -> NullBasis:
    """Trailing right-singular-vector bases from the stacked other-user channels.

    H is the (K, N, M) channel stack. For K=1 the basis is the identity
    (nothing to cancel).
    """
    K, N, M = H.shape
    d = M - N * (K - 1)
    if d < 1:
        raise ValueError("no null-space room: M - N(K-1) < 1")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel contains non-finite entries")
    Vs = []
    degenerate = False
    for k in range(K):
        if K == 1:
            Vs.append(np.eye(M, dtype=complex))
            continue
        G = np.concatenate([H[j] for j in range(K) if j != k], axis=0)
        _, s, vh = np.linalg.svd(G, full_matrices=True)
        # dimension-count cut, not numerical rank; flag instead of guessing
        if s[-1] < DEGENERATE_REL * s[0]:
            degenerate = True
        Vk = vh.conj().T[:, N * (K - 1):]
        hv = np.linalg.norm(H[k] @ Vk)
        if hv < DEGENERATE_REL * np.linalg.norm(H[k]):
            degenerate = True
        Vs.append(Vk)
    return NullBasis(V=tuple(Vs), degenerate=degenerate)


@dataclass(frozen=True)
class EffectiveChannel:
    """Whitened per-user channel H_k V_k W^{-1/2} and its reduced SVD."""

    F: np.ndarray          # N x d whitened channel
    xi: np.ndarray         # singular values, descending
    U_hat: np.ndarray
    V_hat: np.ndarray      # d x m, m = min(N, d)
    W_inv_half: np.ndarray  # d x d, (V^ Omega V)^{-1/2}


def effective_channel(H_k, V_k, omega_diag) -> EffectiveChannel:
    """Whiten user k's null-space channel by the price matrix.

    omega_diag is the diagonal of Omega = Psi + sum_l lambda_l B_l. The
    inverse square root is taken through a Hermitian eigendecomposition
    with a relative ridge so a vanishing price cannot blow up.
    """
    omega_diag = np.asarray(omega_diag, dtype=float)
    if not np.all(np.isfinite(omega_diag)) or np.any(omega_diag < 0):
        raise ValueError("Omega diagonal must be finite and nonnegative")
    W = _hermitize(V_k.conj().T @ (omega_diag[:, None] * V_k))
    ridge = RIDGE_REL * (1.0 + omega_diag.max(initial=0.0))
    w, Q = np.linalg.eigh(W + ridge * np.eye(W.shape[0]))
    if w[0] <= 0:
        raise ValueError("price matrix indefinite after ridge")
    W_inv_half = (Q / np.sqrt(np.maximum(w, ridge))) @ Q.conj().T
    F = H_k @ V_k @ W_inv_half
    U_hat, xi, vh = np.linalg.svd(F, full_matrices=False)
    return EffectiveChannel(F=F, xi=xi, U_hat=U_hat, V_hat=vh.conj().T,
                            W_inv_half=W_inv_half)


def waterfill_dual(xi, sigma2):
    """Power loading against the fixed water level 1/ln2.

    Returns per-mode powers max(1/ln2 - sigma2/xi^2, 0); zero modes get 0.
    """
    xi = np.asarray(xi, dtype=float)
    lam = np.zeros_like(xi)
    nz = xi > 0
    lam[nz] = np.maximum(WATER_LEVEL - sigma2 / xi[nz] ** 2, 0.0)
    return lam


def covariance_from_dual(V_k, eff: EffectiveChannel, lam_tilde):
    """Transmit covariance from the whitened waterfilling solution."""
    lam_tilde = np.asarray(lam_tilde, dtype=float)
    if lam_tilde.shape[0] != eff.V_hat.shape[1]:
        raise ValueError("loading length does not match the reduced SVD")
    inner = (eff.V_hat * lam_tilde) @ eff.V_hat.conj().T
    core = eff.W_inv_half @ inner @ eff.W_inv_half
    return _hermitize(V_k @ core @ V_k.conj().T)


def _logdet_hpd(A):
    """log-det of a Hermitian positive definite matrix, Cholesky first."""
    A = _hermitize(A)
    try:
        c = np.linalg.cholesky(A)
        return 2.0 * float(np.sum(np.log(np.real(np.diag(c)))))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(A)
        return float(np.sum(np.log(np.maximum(w, np.finfo(float).tiny))))


def sum_rate(H, S, sigma2):
    """Sum of log2 det(I + H_k S_k H_k^/sigma2) in bits/s/Hz."""
    total = 0.0
    for k in range(len(S)):
        wmin = np.linalg.eigvalsh(_hermitize(S[k]))[0]
        if wmin < -1e-9 * max(1.0, np.linalg.norm(S[k], 2)):
            raise ValueError("covariance is not PSD")
        A = np.eye(H[k].shape[0]) + (H[k] @ S[k] @ H[k].conj().T) / sigma2
        total += _logdet_hpd(A) / LN2
    return total


def rate_with_interference(H, S, sigma2):
    """General sum rate with the inter-user interference kept in the noise.

    Diagnostic only: equals sum_rate when the ZF structure holds.
    """
    K = len(S)
    total = 0.0
    for k in range(K):
        N = H[k].shape[0]
        J = sigma2 * np.eye(N, dtype=complex)
        for j in range(K):
            if j != k:
                J += H[k] @ S[j] @ H[k].conj().T
        Sig = H[k] @ S[k] @ H[k].conj().T
        total += (_logdet_hpd(J + Sig) - _logdet_hpd(J)) / LN2
    return total


def per_rap_powers(S, n_c):
    """omega_l = Tr{B_l sum_k S_k} for each RAP."""
    M = S[0].shape[0]
    diag = np.zeros(M)
    for Sk in S:
        diag += np.real(np.diag(Sk))
    return diag.reshape(-1, n_c).sum(axis=1)


def embed_covariance(S_sub, subset, n_c, M):
    """Zero-pad a subset-sized covariance back to the full antenna array."""
    S = np.zeros((M, M), dtype=complex)
    idx = np.concatenate([np.arange(l * n_c, (l + 1) * n_c) for l in subset])
    S[np.ix_(idx, idx)] = S_sub
    return S
