import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costsched.config import (CONFIG_ENV, ConfigError, ScenarioConfig, config_from_dict,
                              default_config_path, load_config, lsp_factor, vr_density)
from costsched.rng import RandomStream, as_generator


def test_shipped_defaults_match_dataclass():
    with open(default_config_path()) as fh:
        data = json.load(fh)
    assert "_note" in data
    assert load_config() == ScenarioConfig()


def test_vr_density_closed_form():
    # (N_C - 1) / (pi (R_C - L_C)^2)
    assert vr_density(3, 50, 20) == pytest.approx(2 / (math.pi * 900))
    assert ScenarioConfig(n_clusters=1).vr_density == 0.0


def test_half_wavelength_spacing():
    cfg = ScenarioConfig(carrier_hz=2e9)
    assert cfg.spacing == pytest.approx(299_792_458.0 / 2e9 / 2)


@pytest.mark.parametrize("change", [
    dict(k_selected=0), dict(k_selected=101), dict(vr_radius=10, vr_transition=20),
    dict(eps_h=0.0), dict(activity_threshold=1.0), dict(theta_bs_deg=90),
    dict(pattern_variant="cubic"), dict(sounder_side=1),
    dict(lsp_corr_shadow_angle=0.99, lsp_corr_shadow_delay=-0.99, lsp_corr_angle_delay=0.99),
])
def test_invalid_configs_rejected(change):
    with pytest.raises(ConfigError):
        ScenarioConfig(**change).validate()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"cell_sise": 10})


def test_precedence_flag_over_env_over_default(tmp_path, monkeypatch):
    env_file = tmp_path / "env.json"
    env_file.write_text(json.dumps({"cell_size": 250.0, "seed": 3}))
    monkeypatch.setenv(CONFIG_ENV, str(env_file))
    cfg = load_config()
    assert (cfg.cell_size, cfg.seed) == (250.0, 3)
    assert load_config(seed=9).seed == 9
    other = tmp_path / "explicit.json"
    other.write_text(json.dumps({"cell_size": 700.0}))
    assert load_config(other).cell_size == 700.0


def test_lsp_factor_reproduces_matrix():
    corr = ScenarioConfig().lsp_correlation()
    low = lsp_factor(corr)
    np.testing.assert_allclose(low @ low.T, corr, atol=1e-12)
    assert np.allclose(low, np.tril(low))


def test_lsp_factor_singular_psd():
    # perfectly correlated pair: PSD but singular
    corr = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    low = lsp_factor(corr)
    np.testing.assert_allclose(low @ low.T, corr, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 100), max_size=3))
def test_streams_are_pure_functions_of_their_path(seed, key):
    a = RandomStream(seed).spawn(*key).generator().random(4)
    b = RandomStream(seed, tuple(key)).generator().random(4)
    np.testing.assert_array_equal(a, b)


def test_sibling_streams_differ():
    s = RandomStream(7)
    assert not np.array_equal(s.spawn(0).generator().random(3), s.spawn(1).generator().random(3))


def test_as_generator_accepts_all_forms():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    np.testing.assert_array_equal(as_generator(5).random(2), RandomStream(5).generator().random(2))
