"""Multipath synthesis and the narrowband uplink channel matrix.

The BS carries a uniform linear array along the x-axis with broadside
towards +y, so the azimuth ``phi`` of an MPC enters the steering vector
only through ``sin(phi)`` (the x-component of its horizontal bearing).
MPC fading is a circularly-symmetric complex Gaussian per (cluster, MPC)
shared by every user that sees the cluster; this sharing is what turns
common clusters into inter-user correlation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .config import C0, ScenarioConfig
from .rng import as_generator
from .scenario import BS_OWNER, LOCAL, Cluster, Point3, User, bs_position, vr_gain

TRUNCATION = 2.0  # r_T in units of the per-axis std


@dataclass(frozen=True)
class Mpc:
    pos_bs_side: Point3
    pos_ms_side: Point3
    azimuth: float      # rad, from array broadside
    elevation: float    # rad, seen from the BS
    amplitude: complex = 0j
    delay: float = math.nan


def truncated_gaussian(size, rng, bound: float = TRUNCATION) -> np.ndarray:
    """Zero-mean unit-std Gaussian samples truncated to ``|r| <= bound``."""
    gen = as_generator(rng)
    return stats.truncnorm.rvs(-bound, bound, size=size, random_state=gen)


def cluster_frame(center: np.ndarray, bs: np.ndarray) -> np.ndarray:
    """Columns: radial (delay) axis, transverse (azimuth) axis, vertical axis."""
    radial = center[:2] - bs[:2]
    n = math.hypot(*radial)
    ux, uy = (radial / n) if n > 1e-9 else (1.0, 0.0)
    return np.array([[ux, -uy, 0.0], [uy, ux, 0.0], [0.0, 0.0, 1.0]])


def place_mpcs(center: np.ndarray, spread, unit_offsets: np.ndarray, bs: np.ndarray) -> np.ndarray:
    """MPC positions for unit offsets scaled by sigma = spread / 2 in the cluster frame."""
    sigma = np.asarray(spread, dtype=float) / 2
    pos = center + (unit_offsets * sigma) @ cluster_frame(center, bs).T
    pos[..., 2] = np.maximum(pos[..., 2], 0.0)   # scatterers stay above ground
    return pos


def mpc_angles(pos: np.ndarray, bs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(azimuth from broadside, elevation) of points seen from the BS."""
    rel = np.atleast_2d(pos) - bs
    horiz = np.hypot(rel[:, 0], rel[:, 1])
    sin_phi = np.divide(rel[:, 0], horiz, out=np.zeros_like(horiz), where=horiz > 0)
    return np.arcsin(np.clip(sin_phi, -1, 1)), np.arctan2(rel[:, 2], horiz)


def draw_mpcs(cluster: Cluster, n_mpc: int, rng, bs: Point3) -> list[Mpc]:
    """Geometry of the ``n_mpc`` MPCs of one cluster.

    Offsets along the (delay, azimuth, elevation) axes are truncated
    Gaussians with std ``spread / 2`` and truncation ``2 * std``.  Twin
    clusters reuse the same unit offset on both sides, so MPC ``i`` on
    the BS side is linked to MPC ``i`` on the MS side.
    """
    bs_arr = bs.asarray()
    unit = truncated_gaussian((n_mpc, 3), rng)
    p_bs = place_mpcs(cluster.bs_side_pos.asarray(), cluster.spread_bs, unit, bs_arr)
    if cluster.kind == "twin":
        p_ms = place_mpcs(cluster.ms_side_pos.asarray(), cluster.spread_ms, unit, bs_arr)
    else:
        p_ms = p_bs
    az, el = mpc_angles(p_bs, bs_arr)
    return [Mpc(Point3.of(p_bs[i]), Point3.of(p_ms[i]), float(az[i]), float(el[i]))
            for i in range(n_mpc)]


def cluster_delay(cluster: Cluster, user: User | Point3, bs: Point3) -> float:
    """Cluster delay: BS leg + MS leg + twin separation, plus the link delay."""
    ms = user.pos if isinstance(user, User) else user
    d = (cluster.bs_side_pos.distance(bs) + cluster.ms_side_pos.distance(ms)
         + cluster.twin_distance)
    return d / C0 + cluster.tau_link


def cluster_attenuation(tau_c, k_tau: float, tau_0, tau_b):
    """Exponential delay decay with a floor at the cut-off delay."""
    tau_c = np.asarray(tau_c, dtype=float)
    out = np.maximum(np.exp(-k_tau * (tau_c - tau_0)),
                     np.exp(-k_tau * (np.asarray(tau_b) - tau_0)))
    return float(out) if out.ndim == 0 else out


def path_loss_db(d, wavelength: float):
    """NLoS micro-cell path loss in dB (26 dB/decade slope)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path-loss distance must be positive")
    out = 26 * np.log10(d) + 20 * math.log10(4 * math.pi / wavelength)
    return float(out) if out.ndim == 0 else out


def path_gain(d, wavelength: float):
    """Linear power gain ``10^(-L/10)``."""
    return 10.0 ** (-np.asarray(path_loss_db(d, wavelength)) / 10)


def visibility_gain(cluster: Cluster, user: User, cfg: ScenarioConfig) -> float:
    """Amplitude visibility factor of ``cluster`` for ``user``.

    Local clusters are seen with unit gain by their owner only (the BS one
    by everybody); far clusters follow the VR transition inside the VR
    radius and are invisible outside it.
    """
    if cluster.kind == LOCAL:
        return 1.0 if cluster.owner in (user.id, BS_OWNER) else 0.0
    d = cluster.vr.center.horizontal_distance(user.pos)
    return vr_gain(d, cfg) if d <= cluster.vr.radius else 0.0


def draw_fading(n_clusters: int, n_mpc: int, rng) -> np.ndarray:
    """CN(0, 1/N_p) coefficients, shape (n_clusters, n_mpc): unit expected cluster power."""
    gen = as_generator(rng)
    z = gen.standard_normal((n_clusters, n_mpc, 2))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5 / n_mpc)


def mpc_amplitude(user: User, cluster: Cluster, mpc: Mpc, cfg: ScenarioConfig,
                  fading: complex) -> complex:
    """Complex gain of one MPC for one user.

    ``sqrt(L_p) * A_VR * sqrt(A_C * S) * g * exp(-j 2 pi f_c tau)`` with the
    per-MPC delay taken from its two legs plus the cluster link delay.
    """
    bs = bs_position(cfg)
    a_vr = visibility_gain(cluster, user, cfg)
    if a_vr == 0.0:
        return 0j
    lp = float(path_gain(user.pos.distance(bs), cfg.wavelength))
    tau_0 = user.pos.distance(bs) / C0
    a_c = cluster_attenuation(cluster_delay(cluster, user, bs), cfg.decay, tau_0,
                              tau_0 + cfg.cutoff_excess_delay)
    shadow = cluster.lsp.shadowing if cfg.shadow_in_amplitude else 1.0
    tau = mpc_delay(mpc, user.pos, bs, cluster.tau_link)
    return (math.sqrt(lp) * a_vr * math.sqrt(a_c * shadow) * fading
            * np.exp(-2j * math.pi * cfg.carrier_hz * tau))


def mpc_delay(mpc: Mpc, ms: Point3, bs: Point3, tau_link: float) -> float:
    return (mpc.pos_bs_side.distance(bs) + mpc.pos_ms_side.distance(ms)) / C0 + tau_link


def steering(sin_phi, m_antennas: int, spacing_ratio: float) -> np.ndarray:
    """ULA response, shape (M, n): entry m is ``exp(j alpha m sin(phi))``, alpha = -2 pi d / lambda."""
    alpha = -2 * math.pi * spacing_ratio
    m = np.arange(m_antennas)[:, None]
    return np.exp(1j * alpha * m * np.atleast_1d(sin_phi)[None, :])


def assemble_channel(drop, user_ids, active, fading: np.ndarray,
                     m_antennas: int | None = None) -> np.ndarray:
    """Uplink channel of ``user_ids``: column k sums every MPC of every cluster in ``active[k]``.

    ``active`` maps user id to an iterable of cluster ids (the activity sets
    C(k)); ``fading`` has shape (n_clusters, n_mpc).
    """
    cfg = drop.cfg
    m = cfg.m_antennas if m_antennas is None else m_antennas
    g = drop.gains
    sin_phi = np.sin(drop.mpc_azimuth)           # (N, Np)
    ratio = cfg.spacing / cfg.wavelength
    shadow = drop.shadowing if cfg.shadow_in_amplitude else np.ones(len(drop.clusters))
    h = np.zeros((m, len(user_ids)), dtype=complex)
    for col, k in enumerate(user_ids):
        cl = np.fromiter(active[k], dtype=int)
        if cl.size == 0:
            continue
        ms = drop.user_pos[k]
        legs = (drop.mpc_bs_dist[cl] + np.linalg.norm(drop.mpc_ms[cl] - ms, axis=-1))
        tau = legs / C0 + drop.tau_link[cl][:, None]
        scale = (np.sqrt(g.path_gain[k]) * g.a_vr[k, cl]
                 * np.sqrt(g.a_c[k, cl] * shadow[cl]))
        amp = scale[:, None] * fading[cl] * np.exp(-2j * math.pi * cfg.carrier_hz * tau)
        h[:, col] = steering(sin_phi[cl].ravel(), m, ratio) @ amp.ravel()
    return h


# channel dump: little-endian int64 header (M, K, seed) followed by M*K
# complex128 entries (real, imag float64 pairs), row-major.
_HEADER = struct.Struct("<qqq")


def dump_channel(h: np.ndarray, path, seed: int) -> None:
    path = Path(path)
    m, k = h.shape
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            fh.write(f"{m},{k},{seed}\n")
            for row in h:
                fh.write(",".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) + "\n")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(m, k, seed))
        fh.write(np.ascontiguousarray(h, dtype="<c16").tobytes())


def load_channel(path) -> tuple[np.ndarray, int]:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path) as fh:
            m, k, seed = (int(v) for v in fh.readline().split(","))
            vals = np.loadtxt(fh, delimiter=",", ndmin=2)
        return (vals[:, 0::2] + 1j * vals[:, 1::2]).reshape(m, k), seed
    raw = path.read_bytes()
    m, k, seed = _HEADER.unpack_from(raw)
    h = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(m, k)
    return h.astype(complex), seed
