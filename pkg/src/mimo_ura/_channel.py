"""Block Rayleigh fading and AWGN: ``Y_l = sqrt(P_l) A B_l G^(1/2) H + Z_l``."""

from __future__ import annotations

import numpy as np

from mimo_ura._codebook import ActivityAssignment, Codebook


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...], variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples.

    Real and imaginary parts are two independent ``N(0, variance / 2)`` draws, real part first.
    """
    scale = np.sqrt(variance / 2)
    return scale * rng.standard_normal(shape) + 1j * (scale * rng.standard_normal(shape))


def draw_fading(num_users: int, antennas: int, rng: np.random.Generator) -> np.ndarray:
    """``K x M`` matrix of i.i.d. CN(0, 1) fading coefficients."""
    if num_users < 0 or antennas < 1:
        raise ValueError("need num_users >= 0 and antennas >= 1")
    return complex_normal(rng, (num_users, antennas))


def transmit_subslot(
    codebook: Codebook,
    assignment: ActivityAssignment,
    gains: np.ndarray,
    fading: np.ndarray,
    noise: float,
    power: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received ``n0 x M`` subslot signal for the per-user model."""
    gains = np.asarray(gains, dtype=np.float64)
    num_users = assignment.num_users
    if fading.ndim != 2 or fading.shape[0] != num_users:
        raise ValueError(f"fading has shape {fading.shape}, expected ({num_users}, M)")
    if gains.shape != (num_users,):
        raise ValueError(f"{gains.size} gains for {num_users} users")
    if assignment.num_columns != codebook.num_columns:
        raise ValueError("assignment and codebook disagree on the number of columns")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    antennas = fading.shape[1]
    y = complex_normal(rng, (codebook.subslot_length, antennas), noise) if noise > 0 else (
        np.zeros((codebook.subslot_length, antennas), dtype=np.complex128)
    )
    if num_users:
        columns = codebook.matrix[:, assignment.indices]
        y += np.sqrt(power) * columns @ (np.sqrt(gains)[:, None] * fading)
    return y


def transmit_activity(
    codebook: Codebook,
    gamma: np.ndarray,
    fading_rows: np.ndarray,
    noise: float,
    power: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received signal for the equivalent model ``sqrt(P_l) A Gamma^(1/2) H~ + Z``.

    ``fading_rows`` is the ``2^J x M`` effective fading matrix; only rows on the support
    of ``gamma`` contribute.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (codebook.num_columns,):
        raise ValueError(f"gamma has shape {gamma.shape}, expected ({codebook.num_columns},)")
    if fading_rows.ndim != 2 or fading_rows.shape[0] != codebook.num_columns:
        raise ValueError(f"fading rows have shape {fading_rows.shape}, expected ({codebook.num_columns}, M)")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    antennas = fading_rows.shape[1]
    support = np.flatnonzero(gamma)
    y = complex_normal(rng, (codebook.subslot_length, antennas), noise) if noise > 0 else (
        np.zeros((codebook.subslot_length, antennas), dtype=np.complex128)
    )
    if support.size:
        y += np.sqrt(power) * codebook.matrix[:, support] @ (np.sqrt(gamma[support])[:, None] * fading_rows[support])
    return y
