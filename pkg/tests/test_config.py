"""Tests for scheme parameters, validation, power allocation and config files."""

from __future__ import annotations

import dataclasses
import json
import math

import pytest

from mimo_ura._config import (
    ConfigError,
    Estimator,
    SystemConfig,
    ThresholdMode,
    Violation,
    allocate_power,
    config_from_dict,
    config_to_dict,
    load_config,
    power_for_ebn0,
    rate_report,
    reference_config,
    reference_profile,
    small_config,
    subslot_powers,
    validate_config,
    with_ebn0,
)


def _raw(**overrides) -> SystemConfig:
    params = {
        "n": 3200,
        "num_subslots": 32,
        "index_bits": 12,
        "payload_bits": 96,
        "parity_profile": reference_profile(),
        "power": 0.03,
    }
    params.update(overrides)
    return SystemConfig(**params)


class TestValidateConfig:
    def test_reference_config_is_valid(self) -> None:
        cfg = validate_config(_raw())
        assert cfg.subslot_length == 100
        assert sum(cfg.data_bits) == 96
        assert rate_report(cfg).outer_rate == pytest.approx(0.25)

    def test_single_subslot(self) -> None:
        cfg = validate_config(_raw(n=100, num_subslots=1, index_bits=8, payload_bits=8, parity_profile=(0,)))
        assert cfg.subslot_length == 100
        assert cfg.data_bits == (8,)

    def test_parity_sum_mismatch(self) -> None:
        with pytest.raises(ConfigError) as info:
            validate_config(_raw(payload_bits=97))
        assert info.value.violation is Violation.PARITY_SUM_MISMATCH

    @pytest.mark.parametrize(
        ("overrides", "violation"),
        [
            ({"n": 3201}, Violation.NON_DIVISIBLE_SLOT),
            ({"parity_profile": reference_profile()[:-1]}, Violation.PROFILE_LENGTH_MISMATCH),
            ({"parity_profile": (1,) + reference_profile()[1:]}, Violation.FIRST_PARITY_NONZERO),
            ({"parity_profile": reference_profile()[:-1] + (13,)}, Violation.PARITY_OUT_OF_RANGE),
            ({"index_bits": 25}, Violation.INDEX_BITS_OUT_OF_RANGE),
            ({"power": 0.0}, Violation.INVALID_POWER),
            ({"noise": -1.0}, Violation.INVALID_NOISE),
            ({"antennas": 0}, Violation.INVALID_ANTENNAS),
            ({"active_users": -1}, Violation.INVALID_ACTIVE_USERS),
            ({"active_users": 5, "total_users": 4}, Violation.INVALID_ACTIVE_USERS),
            ({"power_decay": 1.5}, Violation.INVALID_DECAY),
            ({"active_users": 2, "gains": (1.0,)}, Violation.INVALID_GAINS),
            ({"active_users": 1, "gains": (0.0,)}, Violation.INVALID_GAINS),
            ({"max_paths": 0}, Violation.INVALID_MAX_PATHS),
        ],
    )
    def test_named_violations(self, overrides, violation) -> None:
        with pytest.raises(ConfigError) as info:
            validate_config(_raw(**overrides))
        assert info.value.violation is violation

    def test_config_error_is_value_error(self) -> None:
        with pytest.raises(ValueError, match="NON_DIVISIBLE_SLOT"):
            validate_config(_raw(n=3201))

    def test_absolute_mode_needs_one_threshold_per_subslot(self) -> None:
        from mimo_ura._config import DetectorSettings

        detector = DetectorSettings(threshold_mode=ThresholdMode.ABSOLUTE, thresholds=(0.5,) * 3)
        with pytest.raises(ConfigError) as info:
            validate_config(_raw(detector=detector))
        assert info.value.violation is Violation.INVALID_DETECTOR

    def test_invariants_hold_for_presets(self) -> None:
        for cfg in (reference_config(), small_config()):
            assert cfg.num_subslots * cfg.subslot_length == cfg.n
            assert sum(cfg.index_bits - p for p in cfg.parity_profile) == cfg.payload_bits
            assert math.isclose(subslot_powers(cfg).total, cfg.num_subslots * cfg.power, rel_tol=1e-12)


class TestAllocatePower:
    def test_uniform(self) -> None:
        alloc = allocate_power(0.03, 32, 1.0)
        assert alloc.powers == (0.03,) * 32

    def test_geometric_two_subslots(self) -> None:
        alloc = allocate_power(1.0, 2, 0.5)
        assert alloc[0] == pytest.approx(4 / 3)
        assert alloc[1] == pytest.approx(2 / 3)
        assert alloc.total == pytest.approx(2.0)

    @pytest.mark.parametrize(("power", "subslots", "decay"), [(0.03, 32, 0.97), (2.5, 7, 0.1), (1e-3, 1, 0.5)])
    def test_sum_is_preserved(self, power, subslots, decay) -> None:
        alloc = allocate_power(power, subslots, decay)
        assert len(alloc) == subslots
        assert math.isclose(alloc.total, subslots * power, rel_tol=1e-12)
        assert all(a >= b for a, b in zip(alloc.powers, alloc.powers[1:], strict=False))

    @pytest.mark.parametrize("decay", [0.0, -0.5, 1.01])
    def test_invalid_decay(self, decay) -> None:
        with pytest.raises(ConfigError) as info:
            allocate_power(1.0, 4, decay)
        assert info.value.violation is Violation.INVALID_DECAY


class TestRateReport:
    def test_reference_power_for_zero_db(self) -> None:
        assert power_for_ebn0(0.0, 96 / 3200, 1.0) == pytest.approx(0.03)
        assert rate_report(reference_config()).ebn0_db == pytest.approx(0.0, abs=1e-12)

    def test_spectral_efficiency(self) -> None:
        report = rate_report(reference_config(active_users=300))
        assert report.inner_rate == pytest.approx(0.12)
        assert report.spectral_efficiency == pytest.approx(9.0)

    def test_rate_one_corner(self) -> None:
        cfg = validate_config(_raw(n=8, num_subslots=1, index_bits=8, payload_bits=8, parity_profile=(0,), power=2.0))
        report = rate_report(cfg)
        assert report.rate == 1.0
        assert report.ebn0 == pytest.approx(2.0)

    def test_with_ebn0(self) -> None:
        cfg = with_ebn0(reference_config(), 3.0)
        assert rate_report(cfg).ebn0_db == pytest.approx(3.0)


class TestConfigFiles:
    def test_json_with_run_length_profile(self, tmp_path) -> None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "n": 3200,
            "num_subslots": 32,
            "index_bits": 12,
            "payload_bits": 96,
            "parity_profile": [0, [9, 28], [12, 3]],
            "ebn0_db": 0.0,
            "active_users": 50,
            "antennas": 64,
            "seeds": {"codebook_seed": 11},
            "detector": {"estimator": "nnls", "threshold_mode": "top_k", "delta": 2},
        }))
        cfg = load_config(path)
        assert cfg.parity_profile == reference_profile()
        assert cfg.power == pytest.approx(0.03)
        assert cfg.seeds.codebook_seed == 11
        assert cfg.detector.estimator is Estimator.NNLS
        assert cfg.detector.threshold_mode is ThresholdMode.TOP_K

    def test_toml(self, tmp_path) -> None:
        path = tmp_path / "cfg.toml"
        path.write_text(
            'n = 160\nnum_subslots = 4\nindex_bits = 8\npayload_bits = 16\n'
            'parity_profile = [0, 4, 4, 8]\npower = 0.1\nactive_users = 3\n'
            '[detector]\ntheta = 0.4\nmax_epochs = 5\n'
        )
        cfg = load_config(path)
        assert cfg.subslot_length == 40
        assert cfg.detector.theta == 0.4
        assert cfg.detector.max_epochs == 5

    def test_unknown_key_rejected(self) -> None:
        data = config_to_dict(small_config())
        data["colour"] = "blue"
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.violation is Violation.INVALID_FIELD

    def test_unknown_detector_key_rejected(self) -> None:
        data = config_to_dict(small_config())
        data["detector"]["speed"] = 3
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.field_name == "detector"

    def test_missing_power_and_ebn0(self) -> None:
        data = config_to_dict(small_config())
        del data["power"]
        del data["ebn0_db"]
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.violation is Violation.INVALID_POWER

    def test_dict_form_reloads(self) -> None:
        cfg = small_config(active_users=7, gains=(1.0,) * 7, power_decay=0.9)
        assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg

    def test_invalid_value_in_file_names_the_field(self) -> None:
        data = config_to_dict(small_config())
        data["n"] = 161
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.field_name == "n"

    @pytest.mark.parametrize(
        ("key", "value"),
        [
            ("n", "lots"),
            ("n", 160.5),
            ("antennas", [32]),
            ("noise", "loud"),
            ("active_users", True),
            ("gains", ["strong"] * 4),
            ("parity_profile", ["x", 4, 4, 8]),
        ],
    )
    def test_non_numeric_value_is_invalid_field(self, key, value) -> None:
        data = config_to_dict(small_config())
        data[key] = value
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.violation is Violation.INVALID_FIELD
        assert info.value.field_name == key

    def test_integral_float_accepted(self) -> None:
        data = config_to_dict(small_config())
        data["antennas"] = 32.0
        assert config_from_dict(data).antennas == 32

    def test_presets_accept_overrides(self) -> None:
        cfg = small_config(antennas=8)
        assert cfg.antennas == 8
        assert dataclasses.replace(cfg, antennas=32) == small_config()
