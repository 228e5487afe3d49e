"""Drop geometry: users, clusters, visibility regions and large-scale parameters.

The base station sits at the origin of a square cell ``[-R, R]^2`` at height
``h_bs``.  Clusters come in three kinds.  Local clusters surround a terminal
(one per user plus one around the BS).  Far clusters are either *single*
(one scatterer region seen from both ends) or *twin* (a BS-side and an
MS-side region joined by a link delay); each far cluster owns one circular
visibility region (VR) on the ground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import C0, ConfigError, ScenarioConfig, lsp_factor
from .rng import CLUSTERS, LSP, USERS, VR_CENTERS, RandomStream, as_generator

LOCAL, SINGLE, TWIN = "local", "single", "twin"
BS_OWNER = -1


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate in {self}")

    def asarray(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def of(cls, xyz) -> "Point3":
        return cls(float(xyz[0]), float(xyz[1]), float(xyz[2]))

    def distance(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def horizontal_distance(self, other: "Point3") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class User:
    id: int
    pos: Point3


@dataclass(frozen=True)
class VisibilityRegion:
    center: Point3
    radius: float
    transition: float
    cluster_id: int

    def __post_init__(self):
        if not self.radius > self.transition > 0:
            raise ValueError("visibility region needs radius > transition > 0")


@dataclass(frozen=True)
class Lsp:
    delay_spread: float      # s
    angular_spread: float    # deg
    shadowing: float         # linear power gain

    def __post_init__(self):
        if not (self.delay_spread > 0 and self.angular_spread > 0 and self.shadowing > 0):
            raise ValueError(f"large-scale parameters must be positive: {self}")


@dataclass(frozen=True)
class Cluster:
    id: int
    kind: str
    bs_side_pos: Point3
    ms_side_pos: Point3
    spread_bs: tuple[float, float, float]   # (a_C, b_C, h_C) in meters
    spread_ms: tuple[float, float, float]
    lsp: Lsp
    tau_link: float
    vr: VisibilityRegion
    owner: int | None = None    # user id for local MS clusters, BS_OWNER for the BS one

    def __post_init__(self):
        if self.kind not in (LOCAL, SINGLE, TWIN):
            raise ValueError(f"unknown cluster kind {self.kind!r}")
        for spread in (self.spread_bs, self.spread_ms):
            if not all(s > 0 for s in spread):
                raise ValueError(f"cluster {self.id}: spreads must be positive, got {spread}")
        if self.tau_link < 0:
            raise ValueError("link delay must be non-negative")
        if self.kind == LOCAL and self.spread_bs[1] != self.spread_bs[0]:
            raise ValueError("local clusters are circular (b_C = a_C)")
        if self.kind != TWIN and self.ms_side_pos != self.bs_side_pos:
            raise ValueError("only twin clusters have distinct BS/MS-side positions")
        if self.kind != TWIN and self.tau_link != 0:
            raise ValueError("only twin clusters carry a link delay")

    @property
    def twin_distance(self) -> float:
        return self.bs_side_pos.distance(self.ms_side_pos) if self.kind == TWIN else 0.0

    @property
    def stochastic(self) -> bool:
        """True for clusters whose position is not pinned to a terminal."""
        return self.kind != LOCAL


def bs_position(cfg: ScenarioConfig) -> Point3:
    return Point3(0.0, 0.0, cfg.h_bs)


def place_users(cfg: ScenarioConfig, rng) -> list[User]:
    """Uniform users on the cell square, none closer than ``R_th`` to the BS."""
    gen = as_generator(rng)
    r, r_th = cfg.cell_size, cfg.exclusion_radius
    accepted: list[np.ndarray] = []
    attempts = 0
    need = cfg.k_users
    while need > 0:
        batch = max(2 * need, 16)
        if attempts + batch > cfg.max_rejections:
            raise ConfigError("user placement exceeded the rejection-sampling cap")
        attempts += batch
        xy = gen.uniform(-r, r, size=(batch, 2))
        ok = xy[np.hypot(xy[:, 0], xy[:, 1]) >= r_th][:need]
        accepted.append(ok)
        need -= len(ok)
    xy = np.concatenate(accepted) if accepted else np.empty((0, 2))
    return [User(k, Point3(float(x), float(y), cfg.h_ms)) for k, (x, y) in enumerate(xy)]


def draw_lsps(cfg: ScenarioConfig, d, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised large-scale parameters for clusters at BS distances ``d``.

    Returns ``(delay_spread [s], angular_spread [deg], shadowing [linear])``.
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(d <= 0):
        raise ValueError("LSP reference distance must be positive")
    gen = as_generator(rng)
    low = lsp_factor(cfg.lsp_correlation())
    xyz = gen.standard_normal((len(d), 3)) @ low.T
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    delay = cfg.delay_spread_median * np.sqrt(d / 1000.0) * 10.0 ** (cfg.delay_spread_db * z / 10)
    angle = cfg.angular_spread_median_deg * 10.0 ** (cfg.angular_spread_db * y / 10)
    shadow = 10.0 ** (cfg.shadowing_db * x / 10)
    return delay, angle, shadow


def correlated_lsps(cfg: ScenarioConfig, d: float, rng) -> Lsp:
    delay, angle, shadow = draw_lsps(cfg, [d], rng)
    return Lsp(float(delay[0]), float(angle[0]), float(shadow[0]))


def cluster_spreads(kind: str, d_cbs: float, d_cms: float, delay_spread: float,
                    theta_bs: float, phi_bs: float, theta_ms: float):
    """Spatial spreads ``(a_C, b_C, h_C)`` of the BS side and the MS side.

    Angles are in radians.  For non-twin clusters both sides are identical.
    """
    for name, ang in (("theta_bs", theta_bs), ("phi_bs", phi_bs), ("theta_ms", theta_ms)):
        if not 0 < ang < math.pi / 2:
            raise ValueError(f"{name} must lie in (0, pi/2), got {ang}")
    a = delay_spread * C0 / 2
    if kind == LOCAL:
        side = (a, a, d_cbs * math.tan(theta_bs))
        return side, side
    b = d_cbs * math.tan(phi_bs)
    h = d_cbs * math.tan(theta_bs)
    if kind == SINGLE:
        return (a, b, h), (a, b, h)
    if kind == TWIN:
        return (a, b, h), (a, b, d_cms * math.tan(theta_ms))
    raise ValueError(f"unknown cluster kind {kind!r}")


def vr_gain(d_ms_vr, cfg_or_params) -> np.ndarray | float:
    """Visibility transition gain for an MS at distance ``d_ms_vr`` from a VR center.

    ``cfg_or_params`` is a ScenarioConfig or a ``(R_C, L_C, wavelength)`` tuple.
    """
    if isinstance(cfg_or_params, ScenarioConfig):
        rc, lc, lam = cfg_or_params.vr_radius, cfg_or_params.vr_transition, cfg_or_params.wavelength
    else:
        rc, lc, lam = cfg_or_params
    d = np.asarray(d_ms_vr, dtype=float)
    g = 0.5 - np.arctan(2 * math.sqrt(2) * (lc + d - rc) / math.sqrt(lam * lc)) / math.pi
    return float(g) if g.ndim == 0 else g


def twin_ms_distance(d_cbs: float, phi_cbs: float, phi_cms: float) -> float:
    """MS-side distance satisfying d_bs tan(phi_bs) = d_ms tan(phi_ms)."""
    t = math.tan(phi_cms)
    if t == 0:
        raise ValueError("MS-side angle must be non-zero")
    return d_cbs * math.tan(phi_cbs) / t


def twin_ms_angle(d_cbs: float, phi_cbs: float, d_cms: float) -> float:
    """Angle at the VR center that puts the MS-side cluster on the same lateral offset."""
    return math.atan2(d_cbs * math.tan(phi_cbs), d_cms)


def vr_centers(cfg: ScenarioConfig, rng) -> np.ndarray:
    """Poisson field of VR centers over the cell square, shape (n, 2)."""
    gen = as_generator(rng)
    area = (2 * cfg.cell_size) ** 2
    n = gen.poisson(cfg.vr_density * area)
    return gen.uniform(-cfg.cell_size, cfg.cell_size, size=(n, 2))


def radial_distances(cfg: ScenarioConfig, n: int, rng) -> np.ndarray:
    """Shifted-exponential BS-cluster distances, ``r_min + Exp(sigma_r)``."""
    gen = as_generator(rng)
    return cfg.r_min + gen.exponential(1.0, size=n) * cfg.sigma_r


def _streams(rng):
    if isinstance(rng, RandomStream):
        return (rng.spawn(VR_CENTERS).generator(), rng.spawn(CLUSTERS).generator(),
                rng.spawn(LSP).generator())
    gen = as_generator(rng)
    return gen, gen, gen


def place_clusters(cfg: ScenarioConfig, users: list[User], rng) -> list[Cluster]:
    """Local clusters for every terminal plus a Poisson field of single/twin clusters.

    Cluster ids: the BS local cluster first (if enabled), then one local
    cluster per user in user order, then the far clusters.
    """
    g_vr, g_cl, g_lsp = _streams(rng)
    bs = bs_position(cfg)
    rc, lc = cfg.vr_radius, cfg.vr_transition

    centers = vr_centers(cfg, g_vr)
    n_far = len(centers)
    is_single = g_cl.uniform(size=n_far) < cfg.single_fraction
    bearing = np.arctan2(centers[:, 1], centers[:, 0])
    offset = g_cl.normal(0.0, cfg.cluster_angle_std, size=n_far)
    d_bs = radial_distances(cfg, n_far, g_cl)
    d_ms = radial_distances(cfg, n_far, g_cl)
    height = g_cl.uniform(cfg.h_ms, cfg.h_bs, size=n_far)
    link = g_cl.exponential(cfg.link_delay_mean, size=n_far)

    # LSP reference distance: the terminal distance for local clusters,
    # the BS-cluster distance for far ones; the BS local cluster uses R
    local_terms = ([(BS_OWNER, bs)] if cfg.bs_local_cluster else []) + [
        (u.id, u.pos) for u in users]
    d_ref = [cfg.cell_size if owner == BS_OWNER else max(pos.distance(bs), 1.0)
             for owner, pos in local_terms] + list(d_bs)
    delay, angle, shadow = draw_lsps(cfg, d_ref, g_lsp) if d_ref else ([], [], [])

    clusters: list[Cluster] = []
    for owner, pos in local_terms:
        cid = len(clusters)
        lsp = Lsp(float(delay[cid]), float(angle[cid]), float(shadow[cid]))
        d_cbs = pos.distance(bs)
        if owner == BS_OWNER:
            a = lsp.delay_spread * C0 / 2
            side = (a, a, a)
        else:
            side, _ = cluster_spreads(LOCAL, d_cbs, 0.0, lsp.delay_spread,
                                      cfg.theta_bs, cfg.phi_bs, cfg.theta_ms)
        vr = VisibilityRegion(Point3(pos.x, pos.y, 0.0), rc, lc, cid)
        clusters.append(Cluster(cid, LOCAL, pos, pos, side, side, lsp, 0.0, vr, owner))

    for f in range(n_far):
        cid = len(clusters)
        lsp = Lsp(float(delay[cid]), float(angle[cid]), float(shadow[cid]))
        ang = bearing[f] + offset[f]
        bs_side = Point3(d_bs[f] * math.cos(ang), d_bs[f] * math.sin(ang), height[f])
        center = Point3(float(centers[f, 0]), float(centers[f, 1]), 0.0)
        vr = VisibilityRegion(center, rc, lc, cid)
        if is_single[f]:
            side_bs, side_ms = cluster_spreads(SINGLE, d_bs[f], 0.0, lsp.delay_spread,
                                               cfg.theta_bs, cfg.phi_bs, cfg.theta_ms)
            clusters.append(Cluster(cid, SINGLE, bs_side, bs_side, side_bs, side_ms,
                                    lsp, 0.0, vr))
            continue
        phi_ms = twin_ms_angle(d_bs[f], offset[f], d_ms[f])
        back = bearing[f] + math.pi - phi_ms
        ms_side = Point3(center.x + d_ms[f] * math.cos(back),
                         center.y + d_ms[f] * math.sin(back), height[f])
        side_bs, side_ms = cluster_spreads(TWIN, d_bs[f], d_ms[f], lsp.delay_spread,
                                           cfg.theta_bs, cfg.phi_bs, cfg.theta_ms)
        clusters.append(Cluster(cid, TWIN, bs_side, ms_side, side_bs, side_ms, lsp,
                                float(link[f]), vr))
    return clusters
