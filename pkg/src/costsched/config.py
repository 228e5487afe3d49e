"""Scenario configuration.

Config files are flat JSON objects.  Lengths are meters, delays seconds,
powers watts and angles degrees; the dataclass keeps the file units and
exposes radian views where the math needs them.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

C0 = 299_792_458.0  # m/s

CONFIG_ENV = "COSTSCHED_CONFIG"


class ConfigError(ValueError):
    """Raised for inconsistent or unusable scenario parameters."""


@dataclass(frozen=True)
class ScenarioConfig:
    # cell and terminals
    cell_size: float = 600.0            # R, half side of the square cell
    exclusion_fraction: float = 0.1     # R_th / R
    k_users: int = 400
    m_antennas: int = 100
    k_selected: int = 40
    carrier_hz: float = 2.0e9
    antenna_spacing: float | None = None    # None -> half wavelength
    h_bs: float = 5.0
    h_ms: float = 1.5

    # visibility regions
    n_clusters: float = 3.0             # N_C, expected visible clusters
    vr_radius: float = 50.0             # R_C
    vr_transition: float = 20.0         # L_C
    single_fraction: float = 0.5        # share of far clusters that are single (rest twin)
    bs_local_cluster: bool = True

    # clusters and MPCs
    n_mpc: int = 6
    delay_spread_median: float = 0.4e-6     # mu_tau at 1 km
    delay_spread_db: float = 3.0            # sigma_tau
    angular_spread_median_deg: float = 10.0  # mu_beta
    angular_spread_db: float = 3.0          # sigma_beta
    shadowing_db: float = 4.0               # sigma_s
    lsp_corr_shadow_angle: float = -0.5
    lsp_corr_shadow_delay: float = -0.5
    lsp_corr_angle_delay: float = 0.5
    decay: float = 2.0e6                    # k_tau, 1/s
    cutoff_excess_delay: float = 1.5e-6     # tau_B - tau_0
    r_min: float = 20.0
    sigma_r: float = 80.0
    cluster_angle_std_deg: float = 10.0     # sigma_phi_C
    link_delay_mean: float = 0.3e-6         # mu_link
    theta_bs_deg: float = 3.0
    phi_bs_deg: float = 5.0
    theta_ms_deg: float = 10.0
    shadow_in_amplitude: bool = True

    # link budget
    total_power: float = 1.0                # P_t, W
    noise_power: float = 3.98e-13           # sigma_n^2, W (-94 dBm)
    eq4_literal: bool = False

    # scheduling
    eps_h: float = 0.6
    eps_g: float = 0.4
    gwc_grid_search: bool = True
    eps_g_grid: tuple[float, ...] = field(
        default=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9))
    activity_threshold: float = 0.01        # eta
    cond_cap: float = 1.0e6

    # sounder used for the localization error model
    sounder_bandwidth: float = 20.0e6
    sounder_periods: int = 1
    sounder_pn_length: int = 127
    sounder_snr_db: float = 20.0
    sounder_side: int = 5
    sounder_spacing_ratio: float = 0.5
    pattern_variant: str = "printed"

    seed: int = 0
    max_rejections: int = 1_000_000

    def __post_init__(self):
        if isinstance(self.eps_g_grid, list):
            object.__setattr__(self, "eps_g_grid", tuple(self.eps_g_grid))

    # derived quantities
    @property
    def wavelength(self) -> float:
        return C0 / self.carrier_hz

    @property
    def spacing(self) -> float:
        return self.wavelength / 2 if self.antenna_spacing is None else self.antenna_spacing

    @property
    def exclusion_radius(self) -> float:
        return self.exclusion_fraction * self.cell_size

    @property
    def vr_density(self) -> float:
        return vr_density(self.n_clusters, self.vr_radius, self.vr_transition)

    @property
    def angular_spread_median(self) -> float:
        return math.radians(self.angular_spread_median_deg)

    @property
    def theta_bs(self) -> float:
        return math.radians(self.theta_bs_deg)

    @property
    def phi_bs(self) -> float:
        return math.radians(self.phi_bs_deg)

    @property
    def theta_ms(self) -> float:
        return math.radians(self.theta_ms_deg)

    @property
    def cluster_angle_std(self) -> float:
        return math.radians(self.cluster_angle_std_deg)

    def lsp_correlation(self) -> np.ndarray:
        """Correlation of (shadowing X, angular spread Y, delay spread Z)."""
        a, b, c = (self.lsp_corr_shadow_angle, self.lsp_corr_shadow_delay,
                   self.lsp_corr_angle_delay)
        return np.array([[1.0, a, b], [a, 1.0, c], [b, c, 1.0]])

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ScenarioConfig":
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)

        need(self.k_users >= 0 and self.m_antennas >= 1, "K must be >= 0 and M >= 1")
        need(1 <= self.k_selected <= min(self.m_antennas, max(self.k_users, 1)),
             "K_s must satisfy 1 <= K_s <= min(M, K)")
        need(self.vr_radius > self.vr_transition > 0, "need R_C > L_C > 0")
        need(self.n_clusters >= 1, "N_C must be >= 1")
        need(0 < self.eps_h <= 1, "eps_h must lie in (0, 1]")
        need(0 < self.activity_threshold < 1, "eta must lie in (0, 1)")
        need(0 <= self.exclusion_fraction < 1, "exclusion fraction must lie in [0, 1)")
        need(0 <= self.single_fraction <= 1, "single fraction must lie in [0, 1]")
        need(self.n_mpc >= 1, "need at least one MPC per cluster")
        positive = ("cell_size", "carrier_hz", "h_bs", "h_ms", "delay_spread_median",
                    "angular_spread_median_deg", "decay", "cutoff_excess_delay",
                    "r_min", "link_delay_mean", "total_power", "noise_power",
                    "theta_bs_deg", "phi_bs_deg", "theta_ms_deg", "cond_cap",
                    "sounder_bandwidth", "sounder_periods", "sounder_pn_length",
                    "sounder_spacing_ratio")
        for name in positive:
            need(getattr(self, name) > 0, f"{name} must be > 0")
        for name in ("delay_spread_db", "angular_spread_db", "shadowing_db", "sigma_r",
                     "cluster_angle_std_deg"):
            need(getattr(self, name) >= 0, f"{name} must be >= 0")
        for name in ("theta_bs_deg", "phi_bs_deg", "theta_ms_deg"):
            need(getattr(self, name) < 90, f"{name} must be below 90 degrees")
        need(self.sounder_side >= 2, "sounder array side count must be >= 2")
        need(self.pattern_variant in ("printed", "quartic"),
             "pattern_variant must be 'printed' or 'quartic'")
        lsp_factor(self.lsp_correlation())
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eps_g_grid"] = list(self.eps_g_grid)
        return d


def vr_density(n_clusters: float, vr_radius: float, vr_transition: float) -> float:
    """Area density of visibility regions for ``n_clusters`` expected visible clusters."""
    return (n_clusters - 1) / (math.pi * (vr_radius - vr_transition) ** 2)


def lsp_factor(corr: np.ndarray) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == corr``.

    Positive semidefinite but singular matrices are accepted through an
    eigen-decomposition fallback; anything with a clearly negative
    eigenvalue is a configuration error.
    """
    corr = np.asarray(corr, dtype=float)
    if not np.allclose(corr, corr.T):
        raise ConfigError("LSP cross-correlation matrix must be symmetric")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(corr)
    if w.min() < -1e-10:
        raise ConfigError("LSP cross-correlation matrix is not positive semidefinite")
    # QR of the symmetric square root gives a triangular factor
    root = v * np.sqrt(np.clip(w, 0.0, None))
    _, r = np.linalg.qr(root.T)
    low = r.T
    return low * np.sign(np.where(np.diag(low) == 0, 1.0, np.diag(low)))


_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}


def config_from_dict(data: dict) -> ScenarioConfig:
    data = {k: v for k, v in data.items() if not k.startswith("_")}
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ScenarioConfig(**data).validate()


def default_config_path() -> Path:
    return Path(str(resources.files("costsched") / "data" / "default_config.json"))


def load_config(path: str | os.PathLike | None = None, **overrides) -> ScenarioConfig:
    """Load a config; explicit ``path`` beats ``$COSTSCHED_CONFIG`` beats the shipped defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or default_config_path()
    with open(path) as fh:
        data = json.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)
