"""Covariance-based maximum-likelihood activity detection.

The detector sees a subslot only through its sample covariance ``S = Y Y^H / M`` and
minimises

    f(gamma) = log|A Gamma A^H + N0 I| + tr((A Gamma A^H + N0 I)^-1 S)

over ``gamma >= 0`` by exact coordinate minimisation. The inverse covariance is carried
along with rank-one (Sherman-Morrison) updates and refreshed by a direct Cholesky
inversion at every epoch boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from mimo_ura._config import DetectorSettings, ScheduleKind, ThresholdMode

logger = logging.getLogger(__name__)

# Largest real-ified NNLS system (rows * columns) formed explicitly.
_EXPLICIT_NNLS_ENTRIES = 1 << 23
_EXPLICIT_NNLS_MAX_N0 = 128


class DetectorError(ArithmeticError):
    """Numerical fault inside the activity detector."""


@dataclass
class DetectorState:
    """Current estimate and inverse covariance of one subslot's coordinate descent."""

    gamma: np.ndarray
    inverse: np.ndarray
    steps: int = 0
    epochs: int = 0
    schedule: ScheduleKind = ScheduleKind.RANDOM

    @classmethod
    def initial(
        cls,
        num_columns: int,
        subslot_length: int,
        noise: float,
        schedule: ScheduleKind = ScheduleKind.RANDOM,
    ) -> DetectorState:
        """``gamma = 0`` and ``Sigma^-1 = I / N0``."""
        if noise <= 0:
            raise ValueError("noise must be > 0")
        return cls(
            gamma=np.zeros(num_columns, dtype=np.float64),
            inverse=np.eye(subslot_length, dtype=np.complex128) / noise,
            schedule=schedule,
        )

    def check_consistency(self, a: np.ndarray, noise: float, tolerance: float = 1e-6) -> None:
        """Assert ``Sigma^-1 (A Gamma A^H + N0 I) = I`` within *tolerance* (Frobenius)."""
        n0 = a.shape[0]
        error = np.linalg.norm(self.inverse @ true_covariance(a, self.gamma, noise) - np.eye(n0))
        if not error <= tolerance:
            raise DetectorError(f"inverse covariance drifted: residual {error:.3e}")


@dataclass
class DetectorResult:
    """Estimate plus convergence diagnostics."""

    gamma: np.ndarray
    epochs: int
    converged: bool
    objective: list[float] = field(default_factory=list)


def empirical_covariance(y: np.ndarray) -> np.ndarray:
    """``Y Y^H / M`` for an ``n0 x M`` received signal."""
    if y.ndim != 2 or y.shape[1] < 1:
        raise ValueError("received signal must be a 2-D array with at least one column")
    cov = (y @ y.conj().T) / y.shape[1]
    return (cov + cov.conj().T) / 2


def true_covariance(a: np.ndarray, gamma: np.ndarray, noise: float) -> np.ndarray:
    """``A Gamma A^H + N0 I``, summing only over the support of ``gamma``."""
    support = np.flatnonzero(gamma)
    cols = a[:, support]
    cov = (cols * gamma[support]) @ cols.conj().T
    cov = (cov + cov.conj().T) / 2
    cov[np.diag_indices_from(cov)] += noise
    return cov


def _cholesky(cov: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(cov, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DetectorError(f"covariance is not positive definite: {exc}") from None


def direct_inverse(a: np.ndarray, gamma: np.ndarray, noise: float) -> np.ndarray:
    cov = true_covariance(a, gamma, noise)
    inv = scipy.linalg.cho_solve(_cholesky(cov), np.eye(cov.shape[0], dtype=np.complex128))
    return (inv + inv.conj().T) / 2


def neg_log_likelihood(gamma: np.ndarray, a: np.ndarray, sample_cov: np.ndarray, noise: float) -> float:
    """Normalised negative log-likelihood ``f(gamma)``."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    factor = _cholesky(true_covariance(a, gamma, noise))
    logdet = 2.0 * np.sum(np.log(np.abs(np.diag(factor[0]))))
    trace = np.trace(scipy.linalg.cho_solve(factor, sample_cov)).real
    value = float(logdet + trace)
    if not np.isfinite(value):
        raise DetectorError("non-finite log-likelihood")
    return value


def coordinate_derivative(gamma: np.ndarray, a: np.ndarray, sample_cov: np.ndarray, noise: float) -> np.ndarray:
    """``df/dgamma_r = a_r^H Sigma^-1 a_r - a_r^H Sigma^-1 S Sigma^-1 a_r`` for every r."""
    u = direct_inverse(a, gamma, noise) @ a
    quad = np.einsum("ir,ir->r", a.conj(), u).real
    fit = np.einsum("ir,ir->r", u.conj(), sample_cov @ u).real
    return quad - fit


def coordinate_step(state: DetectorState, r: int, a_r: np.ndarray, sample_cov: np.ndarray) -> float:
    """Exact minimisation of ``f`` along coordinate *r*; updates *state* in place.

    Returns the step ``d*``, clamped so that ``gamma_r`` stays nonnegative.
    """
    u = state.inverse @ a_r
    q = np.vdot(a_r, u).real
    numerator = np.vdot(u, sample_cov @ u).real - q
    step = max(numerator / (q * q), -state.gamma[r])
    state.steps += 1
    if step == 0.0:
        return 0.0
    denom = 1.0 + step * q
    if not denom > 0:
        raise DetectorError(f"rank-one update denominator {denom:.3e} at coordinate {r}")
    state.inverse -= (step / denom) * np.outer(u, u.conj())
    state.gamma[r] = max(state.gamma[r] + step, 0.0)
    return float(step)


def ml_coordinate_descent(
    a: np.ndarray,
    sample_cov: np.ndarray,
    noise: float,
    settings: DetectorSettings | None = None,
    *,
    scale: float = 1.0,
    schedule_seed: int = 0,
    return_result: bool = False,
) -> np.ndarray | DetectorResult:
    """Coordinate-descent ML estimate of the activity vector.

    Stops after ``settings.max_epochs`` epochs or once an epoch's largest ``|d*|`` drops
    below ``settings.tolerance * scale``. Random schedules draw a fresh permutation per
    epoch from ``default_rng([schedule_seed, epoch])``.
    """
    settings = settings or DetectorSettings()
    n0, num_columns = a.shape
    columns = np.ascontiguousarray(a.T)
    state = DetectorState.initial(num_columns, n0, noise, settings.schedule)
    tolerance = settings.tolerance * scale
    objective = [neg_log_likelihood(state.gamma, a, sample_cov, noise)] if return_result else []
    converged = False

    for epoch in range(settings.max_epochs):
        if settings.schedule is ScheduleKind.RANDOM:
            order = np.random.default_rng([schedule_seed, epoch]).permutation(num_columns)
        else:
            order = np.arange(num_columns)
        largest = 0.0
        for r in order:
            step = coordinate_step(state, r, columns[r], sample_cov)
            largest = max(largest, abs(step))
        state.epochs += 1
        if settings.debug:
            state.check_consistency(a, noise)
        state.inverse = direct_inverse(a, state.gamma, noise)
        if return_result:
            objective.append(neg_log_likelihood(state.gamma, a, sample_cov, noise))
        logger.debug(
            "epoch %d: max step %.3e, support %d",
            epoch + 1,
            largest,
            int(np.count_nonzero(state.gamma)),
        )
        if largest < tolerance:
            converged = True
            break

    if not converged:
        logger.warning("coordinate descent stopped at max_epochs=%d before reaching tolerance", settings.max_epochs)
    if return_result:
        return DetectorResult(gamma=state.gamma, epochs=state.epochs, converged=converged, objective=objective)
    return state.gamma


def _gram_apply(a: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``Q^T Q gamma`` without forming Q: ``r -> a_r^H (A Gamma A^H) a_r``."""
    model = true_covariance(a, gamma, 0.0)
    return np.einsum("ir,ir->r", a.conj(), model @ a).real


def _nnls_projected_gradient(a: np.ndarray, target: np.ndarray, tolerance: float, max_iter: int) -> np.ndarray:
    num_columns = a.shape[1]
    c = np.einsum("ir,ir->r", a.conj(), target @ a).real
    vector = np.ones(num_columns) / np.sqrt(num_columns)
    lipschitz = 1.0
    for _ in range(50):
        image = _gram_apply(a, vector)
        lipschitz = float(np.linalg.norm(image))
        if lipschitz == 0:
            return np.zeros(num_columns)
        vector = image / lipschitz
    lipschitz *= 1.01

    gamma = np.zeros(num_columns)
    z = gamma.copy()
    t = 1.0
    for _ in range(max_iter):
        new = np.maximum(z - (_gram_apply(a, z) - c) / lipschitz, 0.0)
        if np.linalg.norm(new - gamma) <= tolerance * max(1.0, np.linalg.norm(gamma)):
            return new
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momentum = new + ((t - 1.0) / t_next) * (new - gamma)
        if np.dot(z - new, new - gamma) > 0:
            t_next, momentum = 1.0, new
        gamma, z, t = new, momentum, t_next
    logger.debug("projected-gradient NNLS hit max_iter=%d", max_iter)
    return gamma


def nnls_estimate(
    a: np.ndarray,
    sample_cov: np.ndarray,
    noise: float,
    *,
    tolerance: float = 1e-10,
    max_iter: int = 20_000,
) -> np.ndarray:
    """Non-negative least-squares fit of ``A Gamma A^H + N0 I`` to the sample covariance.

    Small instances form the real-ified system ``[Re Q; Im Q] gamma ~ [Re t; Im t]`` with
    ``Q[:, r] = vec(a_r a_r^H)`` and solve it with ``scipy.optimize.nnls``; larger ones run
    accelerated projected gradient on the Gram form.
    """
    n0, num_columns = a.shape
    target = sample_cov - noise * np.eye(n0)
    if n0 <= _EXPLICIT_NNLS_MAX_N0 and 2 * n0 * n0 * num_columns <= _EXPLICIT_NNLS_ENTRIES:
        q = np.einsum("ir,jr->ijr", a, a.conj()).reshape(n0 * n0, num_columns)
        system = np.vstack([q.real, q.imag])
        rhs = np.concatenate([target.ravel().real, target.ravel().imag])
        gamma, _ = scipy.optimize.nnls(system, rhs, maxiter=50 * num_columns)
        return np.maximum(gamma, 0.0)
    return _nnls_projected_gradient(a, target, tolerance, max_iter)


def nnls_objective(gamma: np.ndarray, a: np.ndarray, sample_cov: np.ndarray, noise: float) -> float:
    """``||A Gamma A^H + N0 I - S||_F^2``."""
    return float(np.linalg.norm(true_covariance(a, gamma, noise) - sample_cov) ** 2)


def detect_support(
    gamma: np.ndarray,
    mode: ThresholdMode | str,
    *,
    threshold: float | None = None,
    theta: float = 0.5,
    min_gain: float = 1.0,
    power_ratio: float = 1.0,
    active_users: int | None = None,
    delta: int = 0,
) -> np.ndarray:
    """Hard support decision on an activity estimate; returns sorted indices.

    * absolute: ``{r : gamma_r >= threshold}``
    * relative: threshold ``theta * min_gain * power_ratio`` (``power_ratio = P_l / P``)
    * top_k: the ``active_users + delta`` largest entries, ties to the lower index
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    mode = ThresholdMode(mode)
    if mode is ThresholdMode.TOP_K:
        if active_users is None:
            raise ValueError("top_k support detection needs the number of active users")
        count = min(active_users + delta, gamma.size)
        order = np.lexsort((np.arange(gamma.size), -gamma))
        return np.sort(order[:count])
    if mode is ThresholdMode.ABSOLUTE:
        if threshold is None:
            raise ValueError("absolute support detection needs a threshold")
        tau = threshold
    else:
        tau = theta * min_gain * power_ratio
    return np.flatnonzero(gamma >= tau)
