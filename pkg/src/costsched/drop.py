"""One drop: users, clusters, MPC geometry and the user-cluster gain tables."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import cluster_attenuation, mpc_angles, path_gain, place_mpcs, truncated_gaussian
from .config import C0, ScenarioConfig
from .rng import MPC, USERS, RandomStream
from .scenario import BS_OWNER, LOCAL, TWIN, Cluster, User, bs_position, place_clusters, place_users, vr_gain


@dataclass(frozen=True)
class LargeScaleGains:
    path_gain: np.ndarray   # (K,) linear L_p per user
    a_vr: np.ndarray        # (K, N) amplitude visibility factor
    a_c: np.ndarray         # (K, N) cluster power attenuation
    tau_c: np.ndarray       # (K, N) cluster delay, s
    tau_0: np.ndarray       # (K,) LoS delay, s


@dataclass
class Drop:
    cfg: ScenarioConfig
    users: list[User]
    clusters: list[Cluster]
    mpc_bs: np.ndarray      # (N, Np, 3)
    mpc_ms: np.ndarray      # (N, Np, 3)

    def __post_init__(self):
        cl = self.clusters
        self.bs = bs_position(self.cfg).asarray()
        self.user_pos = np.array([u.pos.asarray() for u in self.users]).reshape(-1, 3)
        self.cl_bs = np.array([c.bs_side_pos.asarray() for c in cl]).reshape(-1, 3)
        self.cl_ms = np.array([c.ms_side_pos.asarray() for c in cl]).reshape(-1, 3)
        self.vr_center = np.array([c.vr.center.asarray() for c in cl]).reshape(-1, 3)
        self.is_local = np.array([c.kind == LOCAL for c in cl], dtype=bool)
        self.is_twin = np.array([c.kind == TWIN for c in cl], dtype=bool)
        self.owner = np.array([c.owner if c.owner is not None else -2 for c in cl], dtype=int)
        self.tau_link = np.array([c.tau_link for c in cl], dtype=float)
        self.shadowing = np.array([c.lsp.shadowing for c in cl], dtype=float)
        self.twin_dist = np.linalg.norm(self.cl_bs - self.cl_ms, axis=1)
        self.mpc_bs_dist = np.linalg.norm(self.mpc_bs - self.bs, axis=-1)
        az, el = mpc_angles(self.mpc_bs.reshape(-1, 3), self.bs)
        shape = self.mpc_bs.shape[:2]
        self.mpc_azimuth = az.reshape(shape)
        self.mpc_elevation = el.reshape(shape)

    @property
    def k_users(self) -> int:
        return len(self.users)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def visibility(self, vr_center: np.ndarray | None = None) -> np.ndarray:
        """(K, N) amplitude visibility factors, optionally for displaced VR centers."""
        cfg = self.cfg
        centers = self.vr_center if vr_center is None else vr_center
        hd = np.hypot(self.user_pos[:, None, 0] - centers[None, :, 0],
                      self.user_pos[:, None, 1] - centers[None, :, 1])
        a_vr = np.where(hd <= cfg.vr_radius, vr_gain(hd, cfg), 0.0)
        ids = np.arange(self.k_users)[:, None]
        local = (self.owner[None, :] == ids) | (self.owner[None, :] == BS_OWNER)
        return np.where(self.is_local[None, :], local.astype(float), a_vr)

    def attenuation(self, tau_c: np.ndarray) -> np.ndarray:
        tau_0 = self.gains.tau_0[:, None]
        return cluster_attenuation(tau_c, self.cfg.decay, tau_0, tau_0 + self.cfg.cutoff_excess_delay)

    @cached_property
    def gains(self) -> LargeScaleGains:
        d_bs_ms = np.linalg.norm(self.user_pos - self.bs, axis=1)
        tau_0 = d_bs_ms / C0
        d_cbs = np.linalg.norm(self.cl_bs - self.bs, axis=1)
        d_cms = np.linalg.norm(self.user_pos[:, None, :] - self.cl_ms[None, :, :], axis=-1)
        tau_c = (d_cbs[None, :] + d_cms + self.twin_dist[None, :]) / C0 + self.tau_link[None, :]
        a_c = cluster_attenuation(tau_c, self.cfg.decay, tau_0[:, None],
                                  tau_0[:, None] + self.cfg.cutoff_excess_delay)
        lp = np.atleast_1d(path_gain(d_bs_ms, self.cfg.wavelength)) if len(d_bs_ms) else d_bs_ms
        return LargeScaleGains(lp, self.visibility(), np.asarray(a_c), tau_c, tau_0)


def generate_drop(cfg: ScenarioConfig, drop_index: int = 0, seed: int | None = None) -> Drop:
    """Deterministic drop number ``drop_index`` under master seed ``seed`` (default ``cfg.seed``)."""
    stream = RandomStream(cfg.seed if seed is None else seed).spawn(drop_index)
    return drop_from_stream(cfg, stream)


def drop_from_stream(cfg: ScenarioConfig, stream: RandomStream) -> Drop:
    users = place_users(cfg, stream.spawn(USERS))
    clusters = place_clusters(cfg, users, stream)
    return drop_from_parts(cfg, users, clusters, stream.spawn(MPC))


def drop_from_parts(cfg: ScenarioConfig, users: list[User], clusters: list[Cluster],
                    rng=0) -> Drop:
    """Build a drop from explicit users and clusters (MPC offsets drawn from ``rng``)."""
    bs = bs_position(cfg).asarray()
    unit = truncated_gaussian((len(clusters), cfg.n_mpc, 3), rng)
    mpc_bs = np.empty_like(unit)
    mpc_ms = np.empty_like(unit)
    for j, c in enumerate(clusters):
        mpc_bs[j] = place_mpcs(c.bs_side_pos.asarray(), c.spread_bs, unit[j], bs)
        mpc_ms[j] = (place_mpcs(c.ms_side_pos.asarray(), c.spread_ms, unit[j], bs)
                     if c.kind == TWIN else mpc_bs[j])
    return Drop(cfg, users, clusters, mpc_bs, mpc_ms)
