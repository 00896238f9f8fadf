"""Configuration loading, validation, derived quantities, and presets."""
import json
import math

import pytest

from riverseis.config import (
    SimulationConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    load_preset,
    preset_names,
)
from riverseis.errors import InvalidConfigError


class TestDefaults:
    def test_standard_scenario_values(self):
        cfg = SimulationConfig()
        assert cfg.domain.length == 10.0
        assert cfg.domain.slope == 0.05
        assert cfg.flow.u0 == 1.0
        assert cfg.flow.flow_depth == 0.20
        assert cfg.grains.mode_diameter == 0.05
        assert cfg.grains.sigma_log == 0.9
        assert cfg.grains.d_min == 0.005
        assert cfg.grains.d_max == 0.5
        assert cfg.injection.rate == 2.0
        assert cfg.simulation.duration == 200.0
        assert cfg.simulation.dt == 1.0e-4
        assert cfg.simulation.fs == 200.0
        assert cfg.contact.e == 0.45
        assert cfg.contact.mu == 0.5
        assert cfg.water.turb_band == (30.0, 90.0)
        assert cfg.medium.v_c == 1300.0
        assert cfg.medium.q == 20.0
        assert cfg.receiver.offset == 1.0
        assert cfg.analysis.welch_segment == 4096

    def test_derived_median_and_roughness(self):
        cfg = SimulationConfig()
        median = 0.05 * math.exp(0.9**2)
        assert cfg.median_diameter == pytest.approx(median, rel=1e-12)
        assert cfg.z0 == pytest.approx(median / 30.0, rel=1e-12)

    def test_derived_stiffness_sets_reference_contact_time(self):
        cfg = SimulationConfig()
        mode_mass = 2650.0 * math.pi / 6.0 * 0.05**3
        assert cfg.mode_mass == pytest.approx(mode_mass, rel=1e-12)
        assert cfg.k_n == pytest.approx(math.pi**2 * mode_mass / 1e-4, rel=1e-12)
        # contact time of the mode grain against the bed comes out at 10 ms
        t_c = math.pi * math.sqrt(mode_mass / cfg.k_n)
        assert t_c == pytest.approx(1.0e-2, rel=1e-12)

    def test_derived_medium_and_receiver(self):
        cfg = SimulationConfig()
        assert cfg.v_u == pytest.approx(0.73 * 1300.0)
        assert cfg.receiver_x == 5.0
        assert cfg.n_steps == 2_000_000
        assert cfg.record_every == 50

    def test_explicit_overrides_win(self):
        cfg = config_from_dict(
            {"flow": {"z0": 0.002}, "medium": {"v_u": 800.0}, "receiver": {"x": 1.5}}
        )
        assert cfg.z0 == 0.002
        assert cfg.v_u == 800.0
        assert cfg.receiver_x == 1.5


class TestLoading:
    def test_empty_file_means_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        cfg = load_config(path)
        assert config_to_dict(cfg) == config_to_dict(SimulationConfig())

    def test_partial_file_overrides_only_named_keys(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"flow": {"u0": 1.3}, "seed": 7}))
        cfg = load_config(path)
        assert cfg.flow.u0 == 1.3
        assert cfg.seed == 7
        assert cfg.flow.flow_depth == 0.20

    def test_malformed_json_is_reported(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(InvalidConfigError, match="cannot parse"):
            load_config(path)

    def test_unknown_section_rejected(self):
        with pytest.raises(InvalidConfigError, match="unknown config key 'fluids'"):
            config_from_dict({"fluids": {}})

    def test_unknown_key_named_with_section(self):
        with pytest.raises(InvalidConfigError, match="unknown config key 'flow.banana'"):
            config_from_dict({"flow": {"banana": 1.0}})

    def test_notes_key_is_ignored(self):
        cfg = config_from_dict({"notes": "scenario description"})
        assert config_to_dict(cfg) == config_to_dict(SimulationConfig())

    def test_roundtrip_preserves_hash(self):
        cfg = config_from_dict({"flow": {"u0": 1.7}, "weights": {"impact": 0.25}})
        again = config_from_dict(config_to_dict(cfg))
        assert again.config_hash() == cfg.config_hash()

    def test_hash_changes_with_seed(self):
        a = config_from_dict({"seed": 1})
        b = config_from_dict({"seed": 2})
        assert a.config_hash() != b.config_hash()


class TestValidation:
    def test_flow_depth_error_names_the_key(self):
        with pytest.raises(InvalidConfigError, match="'flow.flow_depth' must be positive"):
            config_from_dict({"flow": {"flow_depth": -1.0}})

    def test_band_must_nest_inside_taper(self):
        with pytest.raises(InvalidConfigError, match="nested"):
            config_from_dict({"water": {"turb_band": [0.3, 90.0]}})

    def test_taper_cannot_exceed_nyquist(self):
        with pytest.raises(InvalidConfigError, match="Nyquist"):
            config_from_dict({"water": {"taper_band": [0.5, 101.0]}})

    def test_taper_may_touch_nyquist(self):
        cfg = config_from_dict({"water": {"taper_band": [0.5, 100.0]}})
        assert cfg.water.taper_band == (0.5, 100.0)

    def test_dt_must_divide_sampling_interval(self):
        with pytest.raises(InvalidConfigError, match="divide"):
            config_from_dict({"simulation": {"dt": 3.0e-4}})

    def test_duration_must_be_whole_steps(self):
        with pytest.raises(InvalidConfigError, match="whole number of time steps"):
            config_from_dict({"simulation": {"duration": 200.00003}})

    def test_duration_must_be_whole_samples(self):
        with pytest.raises(InvalidConfigError, match="whole number of samples"):
            config_from_dict({"simulation": {"duration": 200.0025}})

    def test_dt_stability_bound(self):
        with pytest.raises(InvalidConfigError, match="too coarse"):
            config_from_dict({"simulation": {"dt": 2.5e-3}})

    def test_weights_cannot_all_vanish(self):
        with pytest.raises(InvalidConfigError, match="weights"):
            config_from_dict(
                {"weights": {"turbulence": 0, "impact": 0, "rolling": 0, "shedding": 0}}
            )

    def test_receiver_position_inside_domain(self):
        with pytest.raises(InvalidConfigError, match="receiver.x"):
            config_from_dict({"receiver": {"x": 20.0}})

    def test_schedule_name_checked(self):
        with pytest.raises(InvalidConfigError, match="schedule"):
            config_from_dict({"injection": {"schedule": "burst"}})


class TestPresets:
    def test_all_presets_present_and_valid(self):
        names = preset_names()
        for expected in ("testcase", "rin4_rising", "rin4_falling", "rin2"):
            assert expected in names
        for name in names:
            load_preset(name)  # validates on load

    def test_testcase_is_the_default_scenario(self):
        assert load_preset("testcase").config_hash() == SimulationConfig().config_hash()

    def test_rising_limb_scenario(self):
        cfg = load_preset("rin4_rising")
        assert cfg.flow.u0 == 1.3
        assert cfg.flow.flow_depth == 0.10
        assert cfg.injection.rate == 2.0
        assert cfg.simulation.duration == 120.0
        assert cfg.domain.slope == 0.09
        assert cfg.weights.turbulence == 0.8
        assert cfg.weights.impact == 0.2
        assert cfg.weights.rolling == 0.0

    def test_falling_limb_only_rate_differs_from_rising(self):
        rising = config_to_dict(load_preset("rin4_rising"))
        falling = config_to_dict(load_preset("rin4_falling"))
        assert falling["injection"]["rate"] == 0.4
        rising["injection"]["rate"] = 0.4
        assert rising == falling

    def test_wider_channel_scenario(self):
        cfg = load_preset("rin2")
        assert cfg.flow.u0 == 1.7
        assert cfg.flow.flow_depth == 0.35
        assert cfg.simulation.duration == 180.0
        assert cfg.water.turb_band == (20.0, 90.0)
        assert cfg.weights.turbulence == 0.75
        assert cfg.weights.impact == 0.25
        assert cfg.receiver.offset == 3.0

    def test_unknown_preset_lists_available(self):
        with pytest.raises(InvalidConfigError, match="unknown preset"):
            load_preset("nope")
