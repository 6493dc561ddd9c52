"""Common inner codebook and the activity representation of each subslot."""

from __future__ import annotations

import struct
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mimo_ura._tree_code import MessagePath

# Two little-endian uint64 (rows, cols), then row-major (real, imag) float64 pairs.
_HEADER = struct.Struct("<QQ")


@dataclass(frozen=True)
class Codebook:
    """``n0 x 2^J`` complex matrix with every column of squared norm ``n0``.

    Subslot power is applied at transmit time as ``sqrt(P_l) * A``.
    """

    matrix: np.ndarray

    @property
    def subslot_length(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_columns(self) -> int:
        return self.matrix.shape[1]

    def scaled(self, power: float) -> np.ndarray:
        return np.sqrt(power) * self.matrix


@dataclass(frozen=True)
class ActivityAssignment:
    """Subslot indices chosen by the active users (the columns of ``B_l``)."""

    indices: np.ndarray
    num_columns: int

    @property
    def num_users(self) -> int:
        return self.indices.shape[0]

    def matrix(self) -> np.ndarray:
        """Binary ``2^J x K_a`` activity matrix whose k-th column is ``e_{i_k}``."""
        b = np.zeros((self.num_columns, self.num_users), dtype=np.uint8)
        b[self.indices, np.arange(self.num_users)] = 1
        return b


def generate_codebook(subslot_length: int, index_bits: int, seed: int) -> Codebook:
    """I.i.d. CN(0, 1) entries, each column rescaled to squared norm ``n0`` exactly."""
    if subslot_length < 1:
        raise ValueError("subslot_length must be >= 1")
    if index_bits < 0:
        raise ValueError("index_bits must be >= 0")
    rng = np.random.default_rng(seed)
    shape = (subslot_length, 1 << index_bits)
    a = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    a *= np.sqrt(subslot_length) / np.linalg.norm(a, axis=0)
    return Codebook(matrix=a)


def _subslot_indices(messages: Sequence[MessagePath] | np.ndarray, subslot: int) -> np.ndarray:
    if isinstance(messages, np.ndarray):
        if messages.ndim != 2:
            raise ValueError("index array must have shape (K_a, L)")
        return messages[:, subslot].astype(np.int64)
    return np.array([m.indices[subslot] for m in messages], dtype=np.int64)


def assign_activity(
    messages: Sequence[MessagePath] | np.ndarray,
    subslot: int,
    gains: np.ndarray | Sequence[float],
    num_columns: int,
) -> tuple[ActivityAssignment, np.ndarray]:
    """Activity of one subslot: ``gamma_r`` sums the gains of users sending column ``r``."""
    indices = _subslot_indices(messages, subslot)
    gains = np.asarray(gains, dtype=np.float64)
    if gains.shape != indices.shape:
        raise ValueError(f"{gains.size} gains for {indices.size} users")
    if indices.size and (indices.min() < 0 or indices.max() >= num_columns):
        raise ValueError(f"subslot indices must lie in [0, {num_columns})")
    gamma = np.bincount(indices, weights=gains, minlength=num_columns).astype(np.float64)
    return ActivityAssignment(indices=indices, num_columns=num_columns), gamma


def or_mac_output(indices: np.ndarray, num_columns: int) -> np.ndarray:
    """Component-wise OR of the users' indicator vectors (support of ``gamma``)."""
    s = np.zeros(num_columns, dtype=np.uint8)
    s[np.asarray(indices, dtype=np.int64)] = 1
    return s


def save_codebook(path: str | Path, codebook: Codebook) -> None:
    rows, cols = codebook.matrix.shape
    body = np.ascontiguousarray(codebook.matrix, dtype="<c16").tobytes()
    Path(path).write_bytes(_HEADER.pack(rows, cols) + body)


def load_codebook(path: str | Path) -> Codebook:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("codebook file is truncated")
    rows, cols = _HEADER.unpack_from(data)
    expected = _HEADER.size + rows * cols * 16
    if len(data) != expected:
        raise ValueError(f"codebook file has {len(data)} bytes, expected {expected} for {rows}x{cols}")
    matrix = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(rows, cols)
    return Codebook(matrix=matrix.astype(np.complex128))
