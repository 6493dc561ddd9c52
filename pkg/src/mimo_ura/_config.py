"""Scheme parameters, their validation, subslot power allocation and derived rates."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import tomllib
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

MAX_INDEX_BITS = 24


class Violation(StrEnum):
    """Named configuration invariants."""

    NON_DIVISIBLE_SLOT = "NON_DIVISIBLE_SLOT"
    PROFILE_LENGTH_MISMATCH = "PROFILE_LENGTH_MISMATCH"
    FIRST_PARITY_NONZERO = "FIRST_PARITY_NONZERO"
    PARITY_OUT_OF_RANGE = "PARITY_OUT_OF_RANGE"
    PARITY_SUM_MISMATCH = "PARITY_SUM_MISMATCH"
    INDEX_BITS_OUT_OF_RANGE = "INDEX_BITS_OUT_OF_RANGE"
    INVALID_POWER = "INVALID_POWER"
    INVALID_NOISE = "INVALID_NOISE"
    INVALID_ANTENNAS = "INVALID_ANTENNAS"
    INVALID_ACTIVE_USERS = "INVALID_ACTIVE_USERS"
    INVALID_DECAY = "INVALID_DECAY"
    INVALID_GAINS = "INVALID_GAINS"
    INVALID_DETECTOR = "INVALID_DETECTOR"
    INVALID_MAX_PATHS = "INVALID_MAX_PATHS"
    INVALID_FIELD = "INVALID_FIELD"


class ConfigError(ValueError):
    """Raised when a parameter set breaks one of the scheme invariants."""

    def __init__(self, violation: Violation, detail: str, field_name: str | None = None) -> None:
        super().__init__(f"{violation.value}: {detail}")
        self.violation = violation
        self.detail = detail
        self.field_name = field_name


class ScheduleKind(StrEnum):
    RANDOM = "random"
    CYCLIC = "cyclic"


class ThresholdMode(StrEnum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"
    TOP_K = "top_k"


class Estimator(StrEnum):
    ML = "ml"
    NNLS = "nnls"


@dataclass(frozen=True)
class Seeds:
    """Seeds of the three independent random streams (unsigned 64-bit)."""

    codebook_seed: int = 1
    parity_seed: int = 2
    trial_seed: int = 3


@dataclass(frozen=True)
class DetectorSettings:
    """Inner-decoder settings.

    ``tolerance`` bounds the largest coordinate step of an epoch and is scaled by the
    subslot's expected per-user activity level ``P_l / P`` before use.
    """

    max_epochs: int = 10
    tolerance: float = 1e-6
    schedule: ScheduleKind = ScheduleKind.RANDOM
    threshold_mode: ThresholdMode = ThresholdMode.RELATIVE
    theta: float = 0.5
    thresholds: tuple[float, ...] = ()
    delta: int = 0
    estimator: Estimator = Estimator.ML
    debug: bool = False


@dataclass(frozen=True)
class SystemConfig:
    """All scheme parameters.

    Construct raw values and pass them through :func:`validate_config`, which checks the
    invariants and fills in ``subslot_length`` (n0) and ``data_bits`` (b_1..b_L).
    ``total_users`` is bookkeeping only and never enters the signal path.
    """

    n: int
    num_subslots: int
    index_bits: int
    payload_bits: int
    parity_profile: tuple[int, ...]
    power: float
    noise: float = 1.0
    active_users: int = 1
    antennas: int = 1
    total_users: int | None = None
    power_decay: float = 1.0
    gains: tuple[float, ...] = ()
    fresh_fading: bool = True
    max_paths: int = 100_000
    seeds: Seeds = field(default_factory=Seeds)
    detector: DetectorSettings = field(default_factory=DetectorSettings)
    subslot_length: int = 0
    data_bits: tuple[int, ...] = ()

    @property
    def num_columns(self) -> int:
        return 1 << self.index_bits

    def user_gains(self) -> np.ndarray:
        """Per-user large-scale gains; all ones when none are configured."""
        if self.gains:
            return np.asarray(self.gains, dtype=np.float64)
        return np.ones(self.active_users, dtype=np.float64)

    @property
    def min_gain(self) -> float:
        return min(self.gains) if self.gains else 1.0


@dataclass(frozen=True)
class PowerAllocation:
    """Per-subslot transmit powers P_1..P_L (linear)."""

    powers: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.powers)

    def __getitem__(self, subslot: int) -> float:
        return self.powers[subslot]

    def __len__(self) -> int:
        return len(self.powers)


@dataclass(frozen=True)
class RateReport:
    """Rates in bits per complex channel use, Eb/N0 linear and in dB."""

    rate: float
    inner_rate: float
    outer_rate: float
    ebn0: float
    ebn0_db: float
    spectral_efficiency: float


def _check(condition: bool, violation: Violation, detail: str, field_name: str | None = None) -> None:
    if not condition:
        raise ConfigError(violation, detail, field_name)


def _validate_detector(settings: DetectorSettings, num_subslots: int) -> None:
    _check(settings.max_epochs >= 1, Violation.INVALID_DETECTOR, "max_epochs must be >= 1", "detector")
    _check(settings.tolerance > 0, Violation.INVALID_DETECTOR, "tolerance must be > 0", "detector")
    _check(settings.delta >= 0, Violation.INVALID_DETECTOR, "delta must be >= 0", "detector")
    if settings.threshold_mode is ThresholdMode.RELATIVE:
        _check(settings.theta > 0, Violation.INVALID_DETECTOR, "theta must be > 0", "detector")
    if settings.threshold_mode is ThresholdMode.ABSOLUTE:
        _check(
            len(settings.thresholds) == num_subslots,
            Violation.INVALID_DETECTOR,
            f"absolute mode needs {num_subslots} thresholds, got {len(settings.thresholds)}",
            "detector",
        )
        _check(
            all(t >= 0 for t in settings.thresholds),
            Violation.INVALID_DETECTOR,
            "thresholds must be >= 0",
            "detector",
        )


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Check every invariant of *cfg* and return a copy with derived fields filled in.

    Raises :class:`ConfigError` naming the first violated invariant.
    """
    L = cfg.num_subslots  # noqa: N806
    J = cfg.index_bits  # noqa: N806
    _check(L >= 1, Violation.NON_DIVISIBLE_SLOT, f"num_subslots must be >= 1, got {L}", "num_subslots")
    _check(
        cfg.n >= L and cfg.n % L == 0,
        Violation.NON_DIVISIBLE_SLOT,
        f"n={cfg.n} is not a positive multiple of L={L}",
        "n",
    )
    _check(
        1 <= J <= MAX_INDEX_BITS,
        Violation.INDEX_BITS_OUT_OF_RANGE,
        f"index_bits must be in [1, {MAX_INDEX_BITS}], got {J}",
        "index_bits",
    )
    profile = tuple(int(p) for p in cfg.parity_profile)
    _check(
        len(profile) == L,
        Violation.PROFILE_LENGTH_MISMATCH,
        f"parity profile has {len(profile)} entries, expected {L}",
        "parity_profile",
    )
    _check(profile[0] == 0, Violation.FIRST_PARITY_NONZERO, "p_1 must be 0", "parity_profile")
    _check(
        all(0 <= p <= J for p in profile),
        Violation.PARITY_OUT_OF_RANGE,
        f"every parity count must lie in [0, {J}]",
        "parity_profile",
    )
    data_bits = tuple(J - p for p in profile)
    _check(
        sum(data_bits) == cfg.payload_bits,
        Violation.PARITY_SUM_MISMATCH,
        f"sum of data bits is {sum(data_bits)}, payload_bits is {cfg.payload_bits}",
        "payload_bits",
    )
    _check(math.isfinite(cfg.power) and cfg.power > 0, Violation.INVALID_POWER, "power must be > 0", "power")
    _check(math.isfinite(cfg.noise) and cfg.noise > 0, Violation.INVALID_NOISE, "noise must be > 0", "noise")
    _check(cfg.antennas >= 1, Violation.INVALID_ANTENNAS, "antennas must be >= 1", "antennas")
    _check(cfg.active_users >= 0, Violation.INVALID_ACTIVE_USERS, "active_users must be >= 0", "active_users")
    if cfg.total_users is not None:
        _check(
            1 <= cfg.active_users <= cfg.total_users,
            Violation.INVALID_ACTIVE_USERS,
            f"need 1 <= active_users <= total_users, got {cfg.active_users} / {cfg.total_users}",
            "active_users",
        )
    _check(
        0 < cfg.power_decay <= 1,
        Violation.INVALID_DECAY,
        f"power_decay must lie in (0, 1], got {cfg.power_decay}",
        "power_decay",
    )
    if cfg.gains:
        _check(
            len(cfg.gains) == cfg.active_users,
            Violation.INVALID_GAINS,
            f"{len(cfg.gains)} gains given for {cfg.active_users} active users",
            "gains",
        )
        _check(all(g > 0 for g in cfg.gains), Violation.INVALID_GAINS, "gains must be > 0", "gains")
    _check(cfg.max_paths >= 1, Violation.INVALID_MAX_PATHS, "max_paths must be >= 1", "max_paths")
    _validate_detector(cfg.detector, L)

    return dataclasses.replace(
        cfg,
        parity_profile=profile,
        gains=tuple(float(g) for g in cfg.gains),
        subslot_length=cfg.n // L,
        data_bits=data_bits,
    )


def allocate_power(power: float, num_subslots: int, decay: float = 1.0) -> PowerAllocation:
    """Geometric power allocation ``P_l = L P rho^(l-1) (1 - rho) / (1 - rho^L)``.

    ``decay == 1`` gives the uniform allocation. The sum always equals ``L * P``.
    """
    if not 0 < decay <= 1:
        raise ConfigError(Violation.INVALID_DECAY, f"power_decay must lie in (0, 1], got {decay}", "power_decay")
    if power <= 0:
        raise ConfigError(Violation.INVALID_POWER, "power must be > 0", "power")
    if num_subslots < 1:
        raise ConfigError(Violation.NON_DIVISIBLE_SLOT, "num_subslots must be >= 1", "num_subslots")
    if decay == 1:
        return PowerAllocation(powers=(float(power),) * num_subslots)
    weights = decay ** np.arange(num_subslots, dtype=np.float64)
    powers = num_subslots * power * weights / weights.sum()
    return PowerAllocation(powers=tuple(float(p) for p in powers))


def subslot_powers(cfg: SystemConfig) -> PowerAllocation:
    return allocate_power(cfg.power, cfg.num_subslots, cfg.power_decay)


def rate_report(cfg: SystemConfig) -> RateReport:
    """Exact rates, Eb/N0 and total spectral efficiency of a validated config."""
    rate = cfg.payload_bits / cfg.n
    inner_rate = cfg.index_bits / cfg.subslot_length
    outer_rate = cfg.payload_bits / (cfg.num_subslots * cfg.index_bits)
    ebn0 = cfg.power / (rate * cfg.noise)
    return RateReport(
        rate=rate,
        inner_rate=inner_rate,
        outer_rate=outer_rate,
        ebn0=ebn0,
        ebn0_db=10 * math.log10(ebn0),
        spectral_efficiency=inner_rate * outer_rate * cfg.active_users,
    )


def power_for_ebn0(ebn0_db: float, rate: float, noise: float) -> float:
    """Per-symbol power giving the requested Eb/N0 (dB) at *rate* bits per channel use."""
    return rate * noise * 10 ** (ebn0_db / 10)


def with_ebn0(cfg: SystemConfig, ebn0_db: float) -> SystemConfig:
    """Copy of *cfg* with the power set for the requested Eb/N0."""
    return validate_config(
        dataclasses.replace(cfg, power=power_for_ebn0(ebn0_db, cfg.payload_bits / cfg.n, cfg.noise)),
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def reference_profile() -> tuple[int, ...]:
    return (0,) + (9,) * 28 + (12,) * 3


def reference_config(**overrides: Any) -> SystemConfig:
    """The reference operating point: 96-bit payloads over 3200 channel uses at Eb/N0 = 0 dB."""
    params: dict[str, Any] = {
        "n": 3200,
        "num_subslots": 32,
        "index_bits": 12,
        "payload_bits": 96,
        "parity_profile": reference_profile(),
        "power": power_for_ebn0(0.0, 96 / 3200, 1.0),
        "noise": 1.0,
        "active_users": 300,
        "antennas": 400,
    }
    params.update(overrides)
    return validate_config(SystemConfig(**params))


def small_config(**overrides: Any) -> SystemConfig:
    """A desk-scale scheme (J=8, L=4, n0=40) for tests and demos."""
    params: dict[str, Any] = {
        "n": 160,
        "num_subslots": 4,
        "index_bits": 8,
        "payload_bits": 16,
        "parity_profile": (0, 4, 4, 8),
        "power": power_for_ebn0(0.0, 16 / 160, 1.0),
        "noise": 1.0,
        "active_users": 4,
        "antennas": 32,
    }
    params.update(overrides)
    return validate_config(SystemConfig(**params))


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_NON_SCALAR_KEYS = {"subslot_length", "data_bits", "seeds", "detector"}
_TOP_LEVEL_KEYS = {f.name for f in dataclasses.fields(SystemConfig)} - _NON_SCALAR_KEYS
_NUMERIC_KEYS: dict[str, type] = {
    "n": int,
    "num_subslots": int,
    "index_bits": int,
    "payload_bits": int,
    "active_users": int,
    "antennas": int,
    "total_users": int,
    "max_paths": int,
    "power": float,
    "noise": float,
    "power_decay": float,
}


def _coerce(value: Any, kind: type, key: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, int | float | str):
        raise ConfigError(Violation.INVALID_FIELD, f"{key} must be a number, got {value!r}", key)
    if isinstance(value, int):
        return value if kind is int else float(value)
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(Violation.INVALID_FIELD, f"{key} must be a number, got {value!r}", key) from None
    if kind is int:
        if not number.is_integer():
            raise ConfigError(Violation.INVALID_FIELD, f"{key} must be an integer, got {value!r}", key)
        return int(number)
    return number


def _expand_profile(raw: Any) -> tuple[int, ...]:
    """Accept plain lists and ``[value, count]`` run-length pairs."""
    profile: list[int] = []
    for entry in raw:
        if isinstance(entry, list | tuple):
            if len(entry) != 2:
                raise ConfigError(Violation.INVALID_FIELD, f"bad run-length entry {entry!r}", "parity_profile")
            value, count = entry
            profile.extend([int(value)] * int(count))
        else:
            profile.append(int(entry))
    return tuple(profile)


def _build_section(cls: type, data: dict[str, Any], name: str) -> Any:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(Violation.INVALID_FIELD, f"unknown keys in [{name}]: {sorted(unknown)}", name)
    kwargs = dict(data)
    if cls is DetectorSettings:
        try:
            if "schedule" in kwargs:
                kwargs["schedule"] = ScheduleKind(kwargs["schedule"])
            if "threshold_mode" in kwargs:
                kwargs["threshold_mode"] = ThresholdMode(kwargs["threshold_mode"])
            if "estimator" in kwargs:
                kwargs["estimator"] = Estimator(kwargs["estimator"])
        except ValueError as exc:
            raise ConfigError(Violation.INVALID_FIELD, str(exc), name) from None
        if "thresholds" in kwargs:
            kwargs["thresholds"] = tuple(float(t) for t in kwargs["thresholds"])
    else:
        for key, value in kwargs.items():
            if not isinstance(value, int) or value < 0 or value >= 1 << 64:
                raise ConfigError(Violation.INVALID_FIELD, f"seed {key} must be an unsigned 64-bit integer", name)
    return cls(**kwargs)


def config_from_dict(data: dict[str, Any]) -> SystemConfig:
    """Build and validate a config from its documented dictionary form.

    Either ``power`` (linear) or ``ebn0_db`` must be given; ``power`` wins when both are present.
    Derived keys written by :func:`config_to_dict` are ignored and recomputed.
    """
    data = dict(data)
    ebn0_db = data.pop("ebn0_db", None)
    data.pop("subslot_length", None)
    data.pop("data_bits", None)
    seeds = _build_section(Seeds, data.pop("seeds", {}), "seeds")
    detector = _build_section(DetectorSettings, data.pop("detector", {}), "detector")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(Violation.INVALID_FIELD, f"unknown config keys: {sorted(unknown)}")
    for required in ("n", "num_subslots", "index_bits", "payload_bits", "parity_profile"):
        if required not in data:
            raise ConfigError(Violation.INVALID_FIELD, f"missing required key {required!r}", required)
    for key, kind in _NUMERIC_KEYS.items():
        if data.get(key) is not None:
            data[key] = _coerce(data[key], kind, key)
    if ebn0_db is not None:
        ebn0_db = _coerce(ebn0_db, float, "ebn0_db")
    if data["n"] <= 0:
        raise ConfigError(Violation.NON_DIVISIBLE_SLOT, f"n must be positive, got {data['n']}", "n")
    try:
        data["parity_profile"] = _expand_profile(data["parity_profile"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(Violation.INVALID_FIELD, f"bad parity profile: {exc}", "parity_profile") from None
    data["gains"] = tuple(_coerce(g, float, "gains") for g in data.get("gains", ()))
    noise = data.get("noise", 1.0)
    if "power" not in data:
        if ebn0_db is None:
            raise ConfigError(Violation.INVALID_POWER, "either 'power' or 'ebn0_db' is required", "power")
        data["power"] = power_for_ebn0(float(ebn0_db), int(data["payload_bits"]) / int(data["n"]), noise)
    try:
        cfg = SystemConfig(**data, seeds=seeds, detector=detector)
    except TypeError as exc:
        raise ConfigError(Violation.INVALID_FIELD, str(exc)) from None
    return validate_config(cfg)


def load_config(path: str | Path) -> SystemConfig:
    """Read a ``.json`` or ``.toml`` config file."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw)
    logger.debug("loaded config from %s", path)
    return config_from_dict(data)


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    """JSON-serialisable form of a config, including derived fields and Eb/N0 in dB."""
    data = dataclasses.asdict(cfg)
    data["parity_profile"] = list(cfg.parity_profile)
    data["data_bits"] = list(cfg.data_bits)
    data["gains"] = list(cfg.gains)
    data["detector"]["thresholds"] = list(cfg.detector.thresholds)
    data["ebn0_db"] = rate_report(cfg).ebn0_db
    return data
