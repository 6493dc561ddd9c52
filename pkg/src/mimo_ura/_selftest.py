"""Fast in-process invariant checks, run by ``mimo-ura selftest``."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from mimo_ura._capacity import exact_outer_user_cap, outer_user_cap, sum_rate_feasible
from mimo_ura._channel import complex_normal
from mimo_ura._codebook import generate_codebook
from mimo_ura._config import DetectorSettings, ThresholdMode, allocate_power, reference_config
from mimo_ura._detector import (
    DetectorState,
    coordinate_step,
    detect_support,
    direct_inverse,
    ml_coordinate_descent,
    neg_log_likelihood,
    true_covariance,
)
from mimo_ura._tree_code import bits_to_payload, encode_payload_bits, generate_parity_matrices, tree_decode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _tree_round_trip(rng: np.random.Generator) -> str:
    cfg = reference_config()
    matrices = generate_parity_matrices(cfg.parity_profile, cfg.data_bits, cfg.seeds.parity_seed)
    bits = rng.integers(0, 2, size=(200, cfg.payload_bits), dtype=np.uint8)
    indices = encode_payload_bits(bits, matrices)
    for row, path in zip(bits, indices, strict=True):
        decoded, _ = tree_decode([[int(i)] for i in path], matrices)
        if decoded != {bits_to_payload(row)}:
            raise AssertionError(f"payload {bits_to_payload(row):x} did not survive a noiseless round trip")
    return "200 payloads at the reference profile"


def _descent_invariants(rng: np.random.Generator) -> str:
    n0, num_columns, noise = 8, 32, 1.0
    a = complex_normal(rng, (n0, num_columns))
    gamma = np.zeros(num_columns)
    gamma[rng.choice(num_columns, 3, replace=False)] = 1.0
    y = np.linalg.cholesky(true_covariance(a, gamma, noise)) @ complex_normal(rng, (n0, 64))
    sample_cov = (y @ y.conj().T) / 64
    state = DetectorState.initial(num_columns, n0, noise)
    previous = neg_log_likelihood(state.gamma, a, sample_cov, noise)
    for _ in range(3):
        for r in rng.permutation(num_columns):
            coordinate_step(state, int(r), a[:, r], sample_cov)
            current = neg_log_likelihood(state.gamma, a, sample_cov, noise)
            if current > previous + 1e-9 * abs(previous):
                raise AssertionError(f"objective rose from {previous:.12g} to {current:.12g}")
            if np.any(state.gamma < 0):
                raise AssertionError("negative activity estimate")
            previous = current
    reference = direct_inverse(a, state.gamma, noise)
    drift = np.linalg.norm(state.inverse - reference) / np.linalg.norm(reference)
    if drift > 1e-8:
        raise AssertionError(f"incremental inverse drifted by {drift:.3e}")
    return f"objective monotone, inverse drift {drift:.1e}"


def _exact_covariance_recovery(rng: np.random.Generator) -> str:
    a = generate_codebook(20, 5, int(rng.integers(1 << 32))).matrix
    gamma = np.zeros(32)
    support = np.sort(rng.choice(32, 3, replace=False))
    gamma[support] = 1.0
    settings = DetectorSettings(max_epochs=50, tolerance=1e-9)
    estimate = ml_coordinate_descent(a, true_covariance(a, gamma, 1.0), 1.0, settings, schedule_seed=1)
    found = detect_support(estimate, ThresholdMode.RELATIVE)
    if not np.array_equal(found, support):
        raise AssertionError(f"recovered {found.tolist()}, expected {support.tolist()}")
    return "support recovered from the analytic covariance"


def _capacity_constants(_: np.random.Generator) -> str:
    check = sum_rate_feasible(12, 0.25, 300)
    if not (math.isclose(check.lhs, 900.0) and check.feasible):
        raise AssertionError(f"sum-rate check gave {check}")
    if outer_user_cap(12, 0.25) != 1024:
        raise AssertionError("outer-code cap is not 1024")
    if exact_outer_user_cap(12, 0.25) < 512:
        raise AssertionError("exact outer-code cap below 512")
    return f"LHS=900 bits, margin {check.margin:.1f}"


def _power_allocation(_: np.random.Generator) -> str:
    for decay in (1.0, 0.9, 0.5):
        alloc = allocate_power(0.03, 32, decay)
        if not math.isclose(alloc.total, 32 * 0.03, rel_tol=1e-12):
            raise AssertionError(f"allocation with decay {decay} sums to {alloc.total}")
    return "sum P_l = L P"


CHECKS: dict[str, Callable[[np.random.Generator], str]] = {
    "tree_round_trip": _tree_round_trip,
    "descent_invariants": _descent_invariants,
    "exact_covariance_recovery": _exact_covariance_recovery,
    "capacity_constants": _capacity_constants,
    "power_allocation": _power_allocation,
}


def run_selftest(seed: int = 0) -> list[CheckResult]:
    """Run every check; a failing check never stops the others."""
    results: list[CheckResult] = []
    for name, check in CHECKS.items():
        rng = np.random.default_rng([seed, len(results)])
        try:
            results.append(CheckResult(name, True, check(rng)))
        except Exception as exc:  # noqa: BLE001
            logger.warning("selftest check %s failed: %s", name, exc)
            results.append(CheckResult(name, False, str(exc)))
    return results
