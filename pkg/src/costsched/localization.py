"""Cluster localization error model.

Path parameters ``(tau, nu, theta)`` of a single-bounce path are defined so
that the back-projection relation

    (c tau - d_bc)^2 = (h_bs - h_ms + d_bc sin nu)^2 + (d_bs_ms - d_bc cos nu cos theta)^2

is exact: ``nu`` is the elevation of the scatterer seen from the BS and
``theta`` is the in-plane angle whose projection reproduces the horizontal
scatterer-to-MS distance (it equals the true azimuth offset from the BS-MS
bearing whenever the scatterer lies in the vertical BS-MS plane).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import cluster_attenuation
from .config import C0, ScenarioConfig
from .rng import as_generator
from .scenario import vr_gain
from .scheduler import VisibilityMatrix, activity_sets, build_v_matrix


class LocalizationError(ValueError):
    """No admissible scatterer distance for a path estimate."""


@dataclass(frozen=True)
class SounderConfig:
    bandwidth: float = 20e6         # Hz
    periods: int = 1                # I
    pn_length: int = 127            # N
    snr: float = 100.0              # gamma_I, linear
    antennas: int = 64              # M
    side: int = 5                   # M_x
    spacing_ratio: float = 0.5      # d / lambda
    pattern_variant: str = "printed"

    def __post_init__(self):
        if not (self.bandwidth > 0 and self.periods > 0 and self.pn_length > 0
                and self.snr > 0 and self.antennas > 0 and self.spacing_ratio > 0):
            raise ValueError("sounder parameters must be positive")
        if self.side < 2:
            raise ValueError("array side count must be >= 2")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "SounderConfig":
        return cls(cfg.sounder_bandwidth, cfg.sounder_periods, cfg.sounder_pn_length,
                   db_to_linear(cfg.sounder_snr_db), cfg.m_antennas, cfg.sounder_side,
                   cfg.sounder_spacing_ratio, cfg.pattern_variant)


@dataclass(frozen=True)
class PathEstimate:
    tau: float      # s
    nu: float       # rad
    theta: float    # rad

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("path delay must be positive")
        if not -math.pi / 2 < self.nu < math.pi / 2:
            raise ValueError("nu must lie in (-pi/2, pi/2)")


@dataclass
class PerturbedVisibility:
    v_tilde: VisibilityMatrix
    error: np.ndarray               # V - V_tilde
    lost: int = 0
    paths: int = 0
    rows: list[dict] = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        ref = np.linalg.norm(self.v_tilde + self.error)
        return float(np.linalg.norm(self.error) / ref) if ref > 0 else 0.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10)


def pattern_f(nu, variant: str = "printed"):
    """Element field pattern polynomial; ``variant="quartic"`` reads the last term as nu^4."""
    nu = np.asarray(nu, dtype=float)
    if variant == "printed":
        last = -1.71 * nu ** 3
    elif variant == "quartic":
        last = -1.71 * nu ** 4
    else:
        raise ValueError(f"unknown pattern variant {variant!r}")
    out = 0.67 + 2.67 * nu - 6.79 * nu ** 2 + 5.7 * nu ** 3 + last
    return float(out) if out.ndim == 0 else out


def gamma_o(sounder: SounderConfig, nu: float) -> float:
    """Effective output SNR ``M * I * N * |f(nu)|^2 * gamma_I``."""
    f = pattern_f(nu, sounder.pattern_variant)
    return sounder.antennas * sounder.periods * sounder.pn_length * f ** 2 * sounder.snr


def delta_factor(side: int, spacing_ratio: float) -> float:
    mx = side
    return (4 * math.pi ** 2 * spacing_ratio ** 2
            * (7 / 3 * mx ** 3 - 8 * mx ** 2 + 29 / 3 * mx - 4))


def crlb(param: str, sounder: SounderConfig, nu: float) -> float:
    """Closed-form bound for ``param`` in {"delay", "elevation", "azimuth"}."""
    g = gamma_o(sounder, nu)
    if param == "delay":
        return 1 / g / (8 * math.pi ** 2 * sounder.bandwidth)
    delta = delta_factor(sounder.side, sounder.spacing_ratio)
    if param == "azimuth":
        return 1 / g * sounder.antennas / (2 * delta)
    if param == "elevation":
        c = math.cos(nu)
        if abs(c) < 1e-12:
            raise ValueError("elevation bound diverges at nu = +-pi/2")
        return 1 / g * sounder.antennas / (2 * delta * c)
    raise ValueError(f"unknown parameter {param!r}")


def _frame(bs: np.ndarray, ms: np.ndarray):
    u = ms[:2] - bs[:2]
    d = math.hypot(*u)
    if d == 0:
        raise LocalizationError("MS directly below the BS")
    u = u / d
    return d, u, np.array([-u[1], u[0]])


def path_parameters(bs, ms, point) -> PathEstimate:
    """Exact single-bounce ``(tau, nu, theta)`` of a scatterer at ``point``."""
    bs, ms, point = (np.asarray(a, dtype=float) for a in (bs, ms, point))
    d_bs_ms, u, w = _frame(bs, ms)
    rel = point - bs
    d = float(np.linalg.norm(rel))
    tau = (d + float(np.linalg.norm(ms - point))) / C0
    nu = math.asin(rel[2] / d)
    r_b = math.hypot(rel[0], rel[1])
    rho = math.hypot(*(ms[:2] - point[:2]))
    cos_t = (d_bs_ms - rho) / r_b if r_b > 0 else 1.0
    theta = math.acos(min(1.0, max(-1.0, cos_t)))
    if rel[:2] @ w < 0:
        theta = -theta
    return PathEstimate(tau, nu, theta)


def localize_cluster(est: PathEstimate, d_bs_ms: float, h_bs: float, h_ms: float) -> tuple[float, float]:
    """Scatterer legs ``(d_bc, d_mc)`` from a delay/angle estimate.

    Solves the back-projection quadratic in ``d_bc``; admissible roots have
    ``d_bc > 0`` and ``d_mc = c tau - d_bc > 0``, the smaller one wins.
    """
    ct = C0 * est.tau
    a_h = h_bs - h_ms
    if ct <= math.hypot(d_bs_ms, a_h) * (1 + 1e-12):
        raise LocalizationError("path no longer than the direct BS-MS distance")
    s = math.sin(est.nu)
    cc = math.cos(est.nu) * math.cos(est.theta)
    qa = 1 - s * s - cc * cc
    qb = -2 * ct - 2 * a_h * s + 2 * d_bs_ms * cc
    qc = ct * ct - a_h * a_h - d_bs_ms * d_bs_ms
    scale = ct
    if abs(qa) * scale < 1e-12 * abs(qb) or qa == 0:
        if abs(qb) < 1e-12 * scale:
            raise LocalizationError("degenerate geometry")
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            raise LocalizationError("no real scatterer distance")
        q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
        roots = [q / qa, qc / q] if q != 0 else [0.0]
    ok = sorted(r for r in roots if r > 0 and ct - r > 0)
    if not ok:
        raise LocalizationError("no admissible root")
    d_bc = ok[0]
    return d_bc, ct - d_bc


def point_from_legs(d_bc: float, est: PathEstimate, bs, ms) -> np.ndarray:
    """Scatterer position consistent with ``d_bc`` and the path angles."""
    bs, ms = np.asarray(bs, dtype=float), np.asarray(ms, dtype=float)
    d_bs_ms, u, w = _frame(bs, ms)
    r_b = d_bc * math.cos(est.nu)
    rho = abs(d_bs_ms - r_b * math.cos(est.theta))
    x = (d_bs_ms ** 2 + r_b ** 2 - rho ** 2) / (2 * d_bs_ms)
    y = math.copysign(math.sqrt(max(r_b ** 2 - x ** 2, 0.0)), est.theta)
    xy = bs[:2] + x * u + y * w
    return np.array([xy[0], xy[1], bs[2] + d_bc * math.sin(est.nu)])


def perturb_estimate(est: PathEstimate, sounder: SounderConfig, omega: float, signs) -> PathEstimate:
    """Shift every parameter by ``omega * sqrt(CRLB)`` with the given signs."""
    e_tau = omega * math.sqrt(crlb("delay", sounder, est.nu))
    e_nu = omega * math.sqrt(crlb("azimuth", sounder, est.nu))
    e_theta = omega * math.sqrt(crlb("elevation", sounder, est.nu))
    nu = est.nu + signs[1] * e_nu
    nu = min(max(nu, -math.pi / 2 + 1e-9), math.pi / 2 - 1e-9)
    return PathEstimate(est.tau + signs[0] * e_tau, nu, est.theta + signs[2] * e_theta)


def perturb_and_rebuild(drop, v, sounder: SounderConfig, omega: float, rng,
                        active=None) -> PerturbedVisibility:
    """Visibility matrix rebuilt from cluster positions localized with CRLB-sized errors.

    Every (user, active far cluster) path is localized twice, from the exact
    parameters and from the perturbed ones, through the same code; the
    difference of the two solutions is the map error.  It displaces the VR
    center (visibility factor) and changes the cluster delay (attenuation).
    Local clusters sit on known terminals and are left untouched.  Paths
    whose perturbed estimate cannot be localized drop to zero.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    cfg = drop.cfg
    gen = as_generator(rng)
    v = np.asarray(v, dtype=float)
    active = activity_sets(v, cfg.activity_threshold) if active is None else active
    g = drop.gains
    a_vr = g.a_vr.copy()
    a_c = g.a_c.copy()
    lost_mask = np.zeros(v.shape, dtype=bool)
    rows = []
    paths = 0
    for k in range(drop.k_users):
        ms = drop.user_pos[k]
        d_bs_ms = math.hypot(*(ms[:2] - drop.bs[:2]))
        for j in sorted(active[k]):
            if drop.is_local[j]:
                continue
            paths += 1
            signs = gen.choice((-1.0, 1.0), size=3)
            anchor = drop.cl_ms[j]
            row = {"user": k, "cluster": j,
                   "true_d_bc": float(np.linalg.norm(anchor - drop.bs)),
                   "true_d_mc": float(np.linalg.norm(anchor - ms)),
                   "est_d_bc": math.nan, "est_d_mc": math.nan, "lost": 0}
            try:
                est = path_parameters(drop.bs, ms, anchor)
                ref = localize_cluster(est, d_bs_ms, cfg.h_bs, cfg.h_ms)
                noisy = perturb_estimate(est, sounder, omega, signs)
                got = localize_cluster(noisy, d_bs_ms, cfg.h_bs, cfg.h_ms)
            except (LocalizationError, ValueError):
                lost_mask[k, j] = True
                row["lost"] = 1
                rows.append(row)
                continue
            shift = point_from_legs(got[0], noisy, drop.bs, ms) - point_from_legs(ref[0], est, drop.bs, ms)
            if shift[0] != 0.0 or shift[1] != 0.0:
                center = drop.vr_center[j, :2] + shift[:2]
                hd = float(np.hypot(*(ms[:2] - center)))
                a_vr[k, j] = vr_gain(hd, cfg) if hd <= cfg.vr_radius else 0.0
            leg_shift = (got[0] + got[1]) - (ref[0] + ref[1])
            if leg_shift != 0.0:
                a_c[k, j] = cluster_attenuation(g.tau_c[k, j] + leg_shift / C0, cfg.decay,
                                                g.tau_0[k], g.tau_0[k] + cfg.cutoff_excess_delay)
            row["est_d_bc"] = float(row["true_d_bc"] + got[0] - ref[0])
            row["est_d_mc"] = float(row["true_d_mc"] + got[1] - ref[1])
            rows.append(row)
    v_tilde = np.asarray(build_v_matrix(drop, a_vr, a_c))
    v_tilde[lost_mask] = 0.0
    v_tilde = VisibilityMatrix(v_tilde)
    return PerturbedVisibility(v_tilde, v - np.asarray(v_tilde), int(lost_mask.sum()), paths, rows)
