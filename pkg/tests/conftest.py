from __future__ import annotations

import itertools
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from mimo_ura._app import app, store
from mimo_ura._channel import complex_normal
from mimo_ura._config import SystemConfig, small_config
from mimo_ura._detector import coordinate_derivative, neg_log_likelihood, nnls_objective, true_covariance
from mimo_ura._results import MemoryResultStore
from mimo_ura._tree_code import ParityMatrices, bits_to_payload, generate_parity_matrices, parity_consistent

LONG_TESTS = os.environ.get("MIMO_URA_LONG_TESTS") == "1"


def random_instance(
    rng: np.random.Generator,
    n0: int,
    num_columns: int,
    active: int,
    samples: int | None = None,
    noise: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Codebook, true activity and a sample covariance (analytic when *samples* is None)."""
    a = complex_normal(rng, (n0, num_columns))
    gamma = np.zeros(num_columns)
    gamma[rng.choice(num_columns, active, replace=False)] = rng.uniform(0.5, 2.0, active)
    cov = true_covariance(a, gamma, noise)
    if samples is None:
        return a, gamma, cov
    y = np.linalg.cholesky(cov) @ complex_normal(rng, (n0, samples))
    sample_cov = (y @ y.conj().T) / samples
    return a, gamma, (sample_cov + sample_cov.conj().T) / 2


def dense_neg_log_likelihood(gamma: np.ndarray, a: np.ndarray, sample_cov: np.ndarray, noise: float) -> float:
    """Independent evaluation through an explicit determinant and inverse."""
    cov = a @ np.diag(gamma) @ a.conj().T + noise * np.eye(a.shape[0])
    sign, logdet = np.linalg.slogdet(cov)
    assert sign.real > 0
    return float(logdet + np.trace(np.linalg.inv(cov) @ sample_cov).real)


def projected_gradient_ml(
    a: np.ndarray,
    sample_cov: np.ndarray,
    noise: float,
    iterations: int = 5000,
) -> np.ndarray:
    """Projected gradient with backtracking on the ML objective, started at zero."""
    gamma = np.zeros(a.shape[1])
    value = neg_log_likelihood(gamma, a, sample_cov, noise)
    step = 1.0
    for _ in range(iterations):
        grad = coordinate_derivative(gamma, a, sample_cov, noise)
        while True:
            candidate = np.maximum(gamma - step * grad, 0.0)
            new_value = neg_log_likelihood(candidate, a, sample_cov, noise)
            if new_value <= value - 1e-4 * np.dot(grad, gamma - candidate) or step < 1e-14:
                break
            step /= 2
        if value - new_value < 1e-15:
            break
        gamma, value = candidate, new_value
        step = min(step * 2, 1e3)
    return gamma


def exhaustive_nnls(a: np.ndarray, sample_cov: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    """Exact NNLS by trying every support set (tiny instances only)."""
    n0, num_columns = a.shape
    q = np.einsum("ir,jr->ijr", a, a.conj()).reshape(n0 * n0, num_columns)
    system = np.vstack([q.real, q.imag])
    target = (sample_cov - noise * np.eye(n0)).ravel()
    rhs = np.concatenate([target.real, target.imag])
    best, best_value = np.zeros(num_columns), nnls_objective(np.zeros(num_columns), a, sample_cov, noise)
    for size in range(1, num_columns + 1):
        for support in itertools.combinations(range(num_columns), size):
            coef, *_ = np.linalg.lstsq(system[:, support], rhs, rcond=None)
            if np.any(coef < 0):
                continue
            gamma = np.zeros(num_columns)
            gamma[list(support)] = coef
            value = nnls_objective(gamma, a, sample_cov, noise)
            if value < best_value:
                best, best_value = gamma, value
    return best, best_value


def enumerate_paths(lists: list[list[int]], matrices: ParityMatrices) -> set[int]:
    """Brute-force stitching: every combination of list entries that passes all parity checks."""
    found: set[int] = set()
    for combo in itertools.product(*lists):
        if parity_consistent(combo, matrices):
            found.add(path_payload(combo, matrices))
    return found


def path_payload(indices: tuple[int, ...] | list[int], matrices: ParityMatrices) -> int:
    """Payload carried by the data sections of an index path."""
    bits: list[int] = []
    for index, parity, width in zip(indices, matrices.parity_bits, matrices.data_bits, strict=True):
        data = int(index) >> parity
        bits.extend((data >> shift) & 1 for shift in range(width - 1, -1, -1))
    return bits_to_payload(np.array(bits, dtype=np.uint8))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture()
def small_cfg() -> SystemConfig:
    return small_config()


@pytest.fixture()
def small_matrices(small_cfg: SystemConfig) -> ParityMatrices:
    return generate_parity_matrices(small_cfg.parity_profile, small_cfg.data_bits, small_cfg.seeds.parity_seed)


@pytest.fixture()
def test_client() -> TestClient:
    assert isinstance(store, MemoryResultStore), "App tests expect MIMO_URA_STORE_BACKEND=memory (the default)"
    store.clear()
    return TestClient(app)
