"""Monte-Carlo trials: encode, transmit, detect, stitch and score.

Seeding: trial ``t`` of a run with master seed ``s`` uses the 64-bit seed
``SeedSequence([s, t]).generate_state(1, uint64)[0]``, the same for every sweep point, so
adding trials never perturbs earlier ones. Inside a trial, each purpose (payloads,
fading, noise, detector schedule) draws from ``default_rng([trial_seed, purpose, ...])``.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum, StrEnum
from typing import Any

import numpy as np

from mimo_ura._channel import draw_fading, transmit_subslot
from mimo_ura._codebook import Codebook, assign_activity, generate_codebook
from mimo_ura._config import (
    ConfigError,
    Estimator,
    SystemConfig,
    ThresholdMode,
    Violation,
    subslot_powers,
    validate_config,
    with_ebn0,
)
from mimo_ura._detector import detect_support, empirical_covariance, ml_coordinate_descent, nnls_estimate
from mimo_ura._tree_code import (
    ParityMatrices,
    PathOverflowError,
    bits_to_payload,
    encode_payload_bits,
    generate_parity_matrices,
    tree_decode,
)

logger = logging.getLogger(__name__)

_Z95 = 1.959963984540054


class _Stream(IntEnum):
    PAYLOAD = 0
    FADING = 1
    NOISE = 2
    SCHEDULE = 3


class SweepAxis(StrEnum):
    ACTIVE_USERS = "ka"
    ANTENNAS = "antennas"
    EBN0 = "ebn0"


@dataclass
class TrialResult:
    """Outcome of one end-to-end trial."""

    trial_seed: int
    active_users: int
    sent: frozenset[int]
    decoded: frozenset[int]
    misdetections: int
    false_alarms: int
    list_sizes: tuple[int, ...]
    surviving_paths: tuple[int, ...]
    overflow: bool = False
    overflow_stage: int | None = None
    redraws: int = 0
    timings: dict[str, float] = field(default_factory=dict, compare=False)
    estimates: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    @property
    def correct(self) -> int:
        return len(self.decoded & self.sent)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trial_seed": self.trial_seed,
            "active_users": self.active_users,
            "sent": sorted(f"{p:x}" for p in self.sent),
            "decoded": sorted(f"{p:x}" for p in self.decoded),
            "misdetections": self.misdetections,
            "false_alarms": self.false_alarms,
            "list_sizes": list(self.list_sizes),
            "surviving_paths": list(self.surviving_paths),
            "overflow": self.overflow,
            "overflow_stage": self.overflow_stage,
            "redraws": self.redraws,
            "timings": dict(self.timings),
        }


@dataclass(frozen=True)
class PupeMetrics:
    """Per-user error probabilities with binomial 95% half-widths."""

    p_md: float
    p_fa: float
    p_e: float
    trials: int
    ci95: float
    md_ci95: float
    fa_ci95: float


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    metrics: PupeMetrics
    mean_decode_ms: float
    overflows: int
    redraws: int


@dataclass
class SweepResult:
    axis: SweepAxis
    master_seed: int
    trials: int
    points: list[SweepPoint] = field(default_factory=list)

    def rows(self) -> list[dict[str, Any]]:
        """One plot-ready row per axis value."""
        return [
            {
                "axis": p.axis_value,
                "p_md": p.metrics.p_md,
                "p_fa": p.metrics.p_fa,
                "P_e": p.metrics.p_e,
                "trials": p.metrics.trials,
                "ci95": p.metrics.ci95,
                "mean_decode_ms": p.mean_decode_ms,
            }
            for p in self.points
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis.value,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "points": [
                {
                    "axis_value": p.axis_value,
                    **dataclasses.asdict(p.metrics),
                    "mean_decode_ms": p.mean_decode_ms,
                    "overflows": p.overflows,
                    "redraws": p.redraws,
                }
                for p in self.points
            ],
        }


def _derive(*words: int) -> int:
    return int(np.random.SeedSequence(list(words)).generate_state(1, np.uint64)[0])


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    return _derive(master_seed, trial_index)


@functools.lru_cache(maxsize=8)
def codebook_for(subslot_length: int, index_bits: int, seed: int) -> Codebook:
    return generate_codebook(subslot_length, index_bits, seed)


@functools.lru_cache(maxsize=8)
def parity_for(profile: tuple[int, ...], data_bits: tuple[int, ...], seed: int) -> ParityMatrices:
    return generate_parity_matrices(profile, data_bits, seed)


def draw_payloads(num_users: int, payload_bits: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Distinct uniform payloads as a ``(K, b)`` bit array, plus the number of redraws."""
    if payload_bits < 64 and num_users > 1 << payload_bits:
        raise ValueError(f"cannot draw {num_users} distinct {payload_bits}-bit payloads")
    redraws = 0
    while True:
        bits = rng.integers(0, 2, size=(num_users, payload_bits), dtype=np.uint8)
        if num_users < 2 or np.unique(bits, axis=0).shape[0] == num_users:
            return bits, redraws
        redraws += 1
        logger.warning("payload collision among %d users, redrawing (%d)", num_users, redraws)


def _estimate(cfg: SystemConfig, a: np.ndarray, cov: np.ndarray, ratio: float, schedule_seed: int) -> np.ndarray:
    if cfg.detector.estimator is Estimator.NNLS:
        return nnls_estimate(a, cov, cfg.noise)
    return ml_coordinate_descent(a, cov, cfg.noise, cfg.detector, scale=ratio, schedule_seed=schedule_seed)


def run_trial(
    cfg: SystemConfig,
    trial_seed: int,
    *,
    codebook: Codebook | None = None,
    matrices: ParityMatrices | None = None,
    keep_estimates: bool = False,
) -> TrialResult:
    """One end-to-end trial; a pure function of ``(cfg, trial_seed)``.

    A decoder path overflow is recorded and every transmitted message counts as missed.
    """
    codebook = codebook or codebook_for(cfg.subslot_length, cfg.index_bits, cfg.seeds.codebook_seed)
    matrices = matrices or parity_for(cfg.parity_profile, cfg.data_bits, cfg.seeds.parity_seed)
    settings = cfg.detector
    num_users = cfg.active_users
    timings = {"encode": 0.0, "channel": 0.0, "detect": 0.0, "decode": 0.0}

    start = time.perf_counter()
    bits, redraws = draw_payloads(num_users, cfg.payload_bits, np.random.default_rng([trial_seed, _Stream.PAYLOAD]))
    indices = encode_payload_bits(bits, matrices)
    sent = frozenset(bits_to_payload(row) for row in bits)
    timings["encode"] = time.perf_counter() - start

    gains = cfg.user_gains()
    powers = subslot_powers(cfg)
    detection_matrix = codebook.scaled(cfg.power)
    fading_rng = np.random.default_rng([trial_seed, _Stream.FADING])
    noise_rng = np.random.default_rng([trial_seed, _Stream.NOISE])
    fading = None if cfg.fresh_fading else draw_fading(num_users, cfg.antennas, fading_rng)

    lists: list[np.ndarray] = []
    estimates: list[np.ndarray] = []
    for sub in range(cfg.num_subslots):
        start = time.perf_counter()
        assignment, _ = assign_activity(indices, sub, gains, codebook.num_columns)
        if cfg.fresh_fading:
            fading = draw_fading(num_users, cfg.antennas, fading_rng)
        y = transmit_subslot(codebook, assignment, gains, fading, cfg.noise, powers[sub], noise_rng)
        timings["channel"] += time.perf_counter() - start

        start = time.perf_counter()
        ratio = powers[sub] / cfg.power
        gamma_hat = _estimate(
            cfg, detection_matrix, empirical_covariance(y), ratio, _derive(trial_seed, _Stream.SCHEDULE, sub),
        )
        support = detect_support(
            gamma_hat,
            settings.threshold_mode,
            threshold=settings.thresholds[sub] if settings.threshold_mode is ThresholdMode.ABSOLUTE else None,
            theta=settings.theta,
            min_gain=cfg.min_gain,
            power_ratio=ratio,
            active_users=num_users,
            delta=settings.delta,
        )
        lists.append(support)
        if keep_estimates:
            estimates.append(gamma_hat)
        timings["detect"] += time.perf_counter() - start

    start = time.perf_counter()
    overflow_stage = None
    try:
        decoded, stats = tree_decode(lists, matrices, cfg.max_paths)
        surviving = tuple(stats.surviving)
    except PathOverflowError as exc:
        decoded, overflow_stage, surviving = set(), exc.stage, tuple(exc.stats.surviving)
    timings["decode"] = time.perf_counter() - start

    decoded = frozenset(decoded)
    overflow = overflow_stage is not None
    result = TrialResult(
        trial_seed=trial_seed,
        active_users=num_users,
        sent=sent,
        decoded=decoded,
        misdetections=num_users if overflow else len(sent - decoded),
        false_alarms=len(decoded - sent),
        list_sizes=tuple(len(s) for s in lists),
        surviving_paths=surviving,
        overflow=overflow,
        overflow_stage=overflow_stage,
        redraws=redraws,
        timings=timings,
        estimates=estimates if keep_estimates else None,
    )
    logger.debug(
        "trial %d: %d missed, %d false alarms, lists %s",
        trial_seed,
        result.misdetections,
        result.false_alarms,
        result.list_sizes,
    )
    return result


def _half_width(p: float, n: int) -> float:
    return _Z95 * math.sqrt(p * (1 - p) / n) if n else 0.0


def compute_pupe(results: Sequence[TrialResult]) -> PupeMetrics:
    """Aggregate PUPE: ``p_md`` over all sent messages, ``p_fa`` as the mean per-trial false-alarm fraction."""
    if not results:
        raise ValueError("compute_pupe needs at least one trial")
    sent = sum(r.active_users for r in results)
    missed = sum(r.misdetections for r in results)
    listed = sum(len(r.decoded) for r in results)
    p_md = missed / sent if sent else 0.0
    p_fa = sum(r.false_alarms / len(r.decoded) if r.decoded else 0.0 for r in results) / len(results)
    md_ci = _half_width(p_md, sent)
    fa_ci = _half_width(p_fa, listed)
    return PupeMetrics(
        p_md=p_md,
        p_fa=p_fa,
        p_e=p_md + p_fa,
        trials=len(results),
        ci95=math.hypot(md_ci, fa_ci),
        md_ci95=md_ci,
        fa_ci95=fa_ci,
    )


def run_trials(cfg: SystemConfig, seeds: Sequence[int], workers: int = 1) -> list[TrialResult]:
    """Run trials in order of *seeds*, optionally on a process pool; results keep that order."""
    if workers <= 1 or len(seeds) <= 1:
        return [run_trial(cfg, seed) for seed in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(functools.partial(run_trial, cfg), seeds, chunksize=max(1, len(seeds) // (4 * workers))))


def run_point(
    cfg: SystemConfig,
    trials: int,
    master_seed: int | None = None,
    workers: int = 1,
    axis_value: float = math.nan,
) -> tuple[SweepPoint, list[TrialResult]]:
    """Independent trials at a single operating point."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    master = cfg.seeds.trial_seed if master_seed is None else master_seed
    results = run_trials(cfg, [derive_trial_seed(master, t) for t in range(trials)], workers)
    point = SweepPoint(
        axis_value=axis_value,
        metrics=compute_pupe(results),
        mean_decode_ms=1000 * sum(r.timings["decode"] for r in results) / len(results),
        overflows=sum(r.overflow for r in results),
        redraws=sum(r.redraws for r in results),
    )
    return point, results


def apply_axis(cfg: SystemConfig, axis: SweepAxis | str, value: float) -> SystemConfig:
    """Config with the swept parameter set to *value*.

    A per-user gain vector is truncated to the swept K_a; it must have at least that many entries.
    """
    axis = SweepAxis(axis)
    if axis is SweepAxis.ACTIVE_USERS:
        active_users = _integral_axis_value(axis, value)
        gains = cfg.gains
        if gains:
            if len(gains) < active_users:
                raise ConfigError(
                    Violation.INVALID_GAINS,
                    f"{len(gains)} gains cannot cover a sweep to {active_users} active users",
                    "gains",
                )
            gains = gains[:active_users]
        return validate_config(dataclasses.replace(cfg, active_users=active_users, gains=gains))
    if axis is SweepAxis.ANTENNAS:
        return validate_config(dataclasses.replace(cfg, antennas=_integral_axis_value(axis, value)))
    return with_ebn0(cfg, float(value))


def _integral_axis_value(axis: SweepAxis, value: float) -> int:
    if isinstance(value, bool) or not float(value).is_integer():
        raise ConfigError(Violation.INVALID_FIELD, f"{axis.value} must be an integer, got {value!r}", axis.value)
    return int(value)


def monte_carlo_sweep(
    cfg: SystemConfig,
    axis: SweepAxis | str,
    values: Sequence[float],
    trials: int,
    *,
    master_seed: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """PUPE along one parameter axis; deterministic given the master seed."""
    axis = SweepAxis(axis)
    master = cfg.seeds.trial_seed if master_seed is None else master_seed
    sweep = SweepResult(axis=axis, master_seed=master, trials=trials)
    configs = [apply_axis(cfg, axis, value) for value in values]
    for value, point_cfg in zip(values, configs, strict=True):
        point, _ = run_point(point_cfg, trials, master, workers, axis_value=value)
        sweep.points.append(point)
        logger.info(
            "%s=%s: P_e=%.4g (p_md=%.4g, p_fa=%.4g) over %d trials",
            axis.value,
            value,
            point.metrics.p_e,
            point.metrics.p_md,
            point.metrics.p_fa,
            trials,
        )
    return sweep
