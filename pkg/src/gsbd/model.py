"""Scenario geometry, fading, and channel assembly for a downlink C-RAN.

Distances are in km and power densities in dBm/Hz at the configuration
surface. Channels handed to the solver are normalized so that the noise
density is 1 and the reference per-RAP budget is 1; the scalar applied to
the channel entries is recorded in ``ChannelRealization.norm_scale`` so
physical quantities can be recovered.
"""

from dataclasses import dataclass, field
import json

import numpy as np

__all__ = [
    "SystemConfig", "Layout", "ChannelRealization",
    "path_loss_db", "large_scale_gain", "generate_layout", "sample_channel",
    "draw_block", "realization", "layout_rng", "fading_rng",
]


def path_loss_db(distance_km):
    """Distance-dependent loss in dB: 128 + 37.6 log10(d/km)."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return 128.0 + 37.6 * np.log10(d)


def large_scale_gain(pl_db):
    """Linear power gain for a loss given in dB."""
    return 10.0 ** (-np.asarray(pl_db, dtype=float) / 10.0)


def _dbm_to_linear(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Physical scenario: node counts, antenna counts, powers, geometry.

    p_max_dbm may be a scalar (identical budgets) or a length-L sequence.
    """

    L: int = 10
    n_c: int = 2
    K: int = 2
    N: int = 3
    p_max_dbm: object = -40.0
    sigma2_dbm: float = -162.0
    radius_km: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.L, self.n_c, self.K, self.N) < 1:
            raise ValueError("L, n_c, K, N must all be >= 1")
        if self.radius_km <= 0:
            raise ValueError("radius_km must be positive")
        if self.M - self.N * (self.K - 1) < self.N:
            raise ValueError(
                "BD needs M - N(K-1) >= N antennas of null-space room "
                f"(M={self.M}, K={self.K}, N={self.N})")
        if np.ndim(self.p_max_dbm) not in (0, 1):
            raise ValueError("p_max_dbm must be scalar or per-RAP sequence")
        if np.ndim(self.p_max_dbm) == 1 and len(self.p_max_dbm) != self.L:
            raise ValueError("per-RAP p_max_dbm must have length L")

    @property
    def M(self):
        return self.n_c * self.L

    @property
    def p_max_lin(self):
        """Per-RAP power densities in linear units (length L)."""
        p = np.broadcast_to(_dbm_to_linear(self.p_max_dbm), (self.L,))
        return np.array(p, dtype=float)

    @property
    def sigma2_lin(self):
        return float(_dbm_to_linear(self.sigma2_dbm))

    @property
    def norm_scale(self):
        """Factor applied to channel entries: sqrt(max_l P_l / sigma2)."""
        return float(np.sqrt(self.p_max_lin.max() / self.sigma2_lin))

    @property
    def budgets(self):
        """Per-RAP budgets in normalized units (reference RAP = 1)."""
        return self.p_max_lin / self.p_max_lin.max()

    @property
    def sigma2(self):
        """Noise power in normalized units."""
        return 1.0


@dataclass(frozen=True)
class Layout:
    """RAP and user positions (km), all within the configured disc."""

    rap_xy: np.ndarray   # (L, 2)
    user_xy: np.ndarray  # (K, 2)

    def distances(self):
        """User-to-RAP distance table, shape (K, L)."""
        diff = self.user_xy[:, None, :] - self.rap_xy[None, :, :]
        return np.linalg.norm(diff, axis=2)


def _disc_points(n, radius, rng):
    # inverse-CDF radius keeps the density uniform over area
    r = radius * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def generate_layout(cfg: SystemConfig, rng: np.random.Generator) -> Layout:
    """Sample RAP and user positions uniformly over the disc."""
    return Layout(rap_xy=_disc_points(cfg.L, cfg.radius_km, rng),
                  user_xy=_disc_points(cfg.K, cfg.radius_km, rng))


@dataclass(frozen=True)
class ChannelRealization:
    """Normalized channels plus the metadata needed to replay them.

    H is the (K, N, M) stack of per-user channels; column block l of H[k]
    is the channel from RAP l. gamma2 holds the (K, L) large-scale gains in
    linear units, before normalization.
    """

    cfg: SystemConfig
    layout: Layout
    H: np.ndarray
    gamma2: np.ndarray
    norm_scale: float

    def block(self, k, l):
        """View of the N x n_c channel from RAP l to user k."""
        nc = self.cfg.n_c
        return self.H[k, :, l * nc:(l + 1) * nc]

    def unnormalized(self):
        return self.H / self.norm_scale

    def to_json(self):
        """Self-describing JSON string (dims, seed, layout, gains, entries)."""
        payload = {
            "format": "gsbd-channel-v1",
            "dims": {"L": self.cfg.L, "n_c": self.cfg.n_c,
                     "K": self.cfg.K, "N": self.cfg.N},
            "config": {
                "p_max_dbm": np.asarray(self.cfg.p_max_dbm).tolist(),
                "sigma2_dbm": self.cfg.sigma2_dbm,
                "radius_km": self.cfg.radius_km,
                "seed": self.cfg.seed,
            },
            "layout": {"rap_xy": self.layout.rap_xy.tolist(),
                       "user_xy": self.layout.user_xy.tolist()},
            "gamma2": self.gamma2.tolist(),
            "norm_scale": self.norm_scale,
            # row-major (k, n, m), each entry as [re, im]
            "entries": np.stack([self.H.real, self.H.imag], axis=-1).tolist(),
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text):
        payload = json.loads(text)
        if payload.get("format") != "gsbd-channel-v1":
            raise ValueError("unrecognized channel container format")
        d, c = payload["dims"], payload["config"]
        p_max = c["p_max_dbm"]
        cfg = SystemConfig(L=d["L"], n_c=d["n_c"], K=d["K"], N=d["N"],
                           p_max_dbm=(p_max if np.ndim(p_max) else float(p_max)),
                           sigma2_dbm=c["sigma2_dbm"],
                           radius_km=c["radius_km"], seed=c["seed"])
        layout = Layout(rap_xy=np.asarray(payload["layout"]["rap_xy"], float),
                        user_xy=np.asarray(payload["layout"]["user_xy"], float))
        ent = np.asarray(payload["entries"], dtype=float)
        H = ent[..., 0] + 1j * ent[..., 1]
        return ChannelRealization(cfg=cfg, layout=layout, H=H,
                                  gamma2=np.asarray(payload["gamma2"], float),
                                  norm_scale=float(payload["norm_scale"]))


def layout_rng(cfg: SystemConfig, layout_idx: int) -> np.random.Generator:
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(0x4C, layout_idx))
    return np.random.default_rng(ss)


def fading_rng(cfg: SystemConfig, layout_idx: int, fading_idx: int):
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(0xFA, layout_idx, fading_idx))
    return np.random.default_rng(ss)


def draw_block(gamma2, n, m, rng: np.random.Generator):
    """n x m block of iid CN(0, gamma2) entries (real/imag each gamma2/2)."""
    z = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return np.sqrt(gamma2 / 2.0) * z


def sample_channel(cfg: SystemConfig, layout: Layout,
                   rng: np.random.Generator) -> ChannelRealization:
    """Draw iid complex-Gaussian small-scale fading on top of the path loss.

    Entry (k, l) has variance gamma2[k, l] before normalization; the stored
    H carries the extra factor cfg.norm_scale. Blocks are drawn user-major,
    RAP-minor, which fixes the stream layout for reproducibility.
    """
    K, N, nc = cfg.K, cfg.N, cfg.n_c
    gamma2 = large_scale_gain(path_loss_db(layout.distances()))
    H = np.empty((K, N, cfg.M), dtype=complex)
    scale = cfg.norm_scale
    for k in range(K):
        for l in range(cfg.L):
            H[k, :, l * nc:(l + 1) * nc] = scale * draw_block(
                gamma2[k, l], N, nc, rng)
    return ChannelRealization(cfg=cfg, layout=layout, H=H,
                              gamma2=gamma2, norm_scale=scale)


def realization(cfg: SystemConfig, layout_idx: int = 0,
                fading_idx: int = 0) -> ChannelRealization:
    """Reproducible realization addressed by (layout_idx, fading_idx)."""
    layout = generate_layout(cfg, layout_rng(cfg, layout_idx))
    return sample_channel(cfg, layout, fading_rng(cfg, layout_idx, fading_idx))
