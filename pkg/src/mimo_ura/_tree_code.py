"""Outer tree code: block splitting, pseudo-random linear parity and list stitching.

Bit conventions (fixed, pinned by tests):

* A payload of ``b`` bits is an unsigned integer whose most significant bit is payload bit 1.
* Block ``l`` carries payload bits ``b_1 + ... + b_(l-1)`` onward, ``b_l`` of them.
* Inside a ``J``-bit subslot index the data bits occupy the most significant positions and
  the ``p_l`` parity bits the least significant ones.
* Parity of block ``l`` is the GF(2) sum over every earlier block ``l' < l`` of
  ``G[l, l'] @ data(l')``.
* ``G[l, l']`` is drawn i.i.d. uniform over {0, 1} from ``numpy.random.Philox`` seeded with
  ``SeedSequence([parity_seed, l, l'])`` where ``l`` and ``l'`` are zero-based subslot numbers.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MAX_PATHS = 100_000


@dataclass(frozen=True)
class ParityMatrices:
    """Binary parity generators shared by every user.

    ``blocks[(l, lp)]`` has shape ``(p_l, b_lp)``; ``stacked[l]`` concatenates the blocks of
    subslot ``l`` column-wise so that ``stacked[l] @ payload_prefix`` gives its parity bits.
    """

    index_bits: int
    data_bits: tuple[int, ...]
    parity_bits: tuple[int, ...]
    blocks: Mapping[tuple[int, int], np.ndarray] = field(compare=False)
    stacked: tuple[np.ndarray, ...] = field(compare=False, repr=False)

    @property
    def num_subslots(self) -> int:
        return len(self.data_bits)

    @property
    def payload_bits(self) -> int:
        return sum(self.data_bits)

    @classmethod
    def from_blocks(
        cls,
        index_bits: int,
        parity_profile: Sequence[int],
        blocks: Mapping[tuple[int, int], np.ndarray],
    ) -> ParityMatrices:
        """Assemble matrices from explicit blocks; missing ``(l, lp)`` pairs are all-zero."""
        profile = tuple(int(p) for p in parity_profile)
        data_bits = tuple(index_bits - p for p in profile)
        full: dict[tuple[int, int], np.ndarray] = {}
        stacked: list[np.ndarray] = []
        for sub, parity in enumerate(profile):
            row: list[np.ndarray] = []
            for prev in range(sub):
                if parity == 0:
                    break
                block = blocks.get((sub, prev))
                if block is None:
                    block = np.zeros((parity, data_bits[prev]), dtype=np.uint8)
                block = np.asarray(block, dtype=np.uint8) & 1
                if block.shape != (parity, data_bits[prev]):
                    raise ValueError(
                        f"block ({sub}, {prev}) has shape {block.shape}, expected {(parity, data_bits[prev])}"
                    )
                full[(sub, prev)] = block
                row.append(block)
            prefix = sum(data_bits[:sub])
            stacked.append(np.hstack(row) if row else np.zeros((parity, prefix), dtype=np.uint8))
        return cls(
            index_bits=index_bits,
            data_bits=data_bits,
            parity_bits=profile,
            blocks=full,
            stacked=tuple(stacked),
        )


@dataclass(frozen=True)
class MessagePath:
    """A payload and its sequence of subslot indices."""

    payload: int
    indices: tuple[int, ...]


@dataclass
class DecodeStats:
    """Per-stage surviving-path counts of one decoding run."""

    surviving: list[int] = field(default_factory=list)
    overflow_stage: int | None = None
    duplicate_payloads: int = 0

    @property
    def overflow(self) -> bool:
        return self.overflow_stage is not None

    @property
    def peak_paths(self) -> int:
        return max(self.surviving, default=0)


class PathOverflowError(RuntimeError):
    """Raised when the surviving paths of a stage exceed ``max_paths``."""

    def __init__(self, stage: int, paths: int, stats: DecodeStats) -> None:
        super().__init__(f"PATH_OVERFLOW: {paths} surviving paths at stage {stage + 1}")
        self.stage = stage
        self.paths = paths
        self.stats = stats


# ---------------------------------------------------------------------------
# Bit helpers
# ---------------------------------------------------------------------------


def payload_to_bits(payload: int, num_bits: int) -> np.ndarray:
    """MSB-first bit vector of an unsigned payload integer."""
    if payload < 0 or payload >> num_bits:
        raise ValueError(f"payload does not fit in {num_bits} bits")
    nbytes = max(1, (num_bits + 7) // 8)
    raw = np.frombuffer(payload.to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[nbytes * 8 - num_bits:]


def bits_to_payload(bits: np.ndarray) -> int:
    """Inverse of :func:`payload_to_bits`."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return 0
    pad = (-bits.size) % 8
    return int.from_bytes(np.packbits(bits).tobytes(), "big") >> pad


def _ints_to_bit_rows(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(values, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def _bit_rows_to_ints(bits: np.ndarray) -> np.ndarray:
    width = bits.shape[1]
    weights = np.left_shift(1, np.arange(width - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def _parity_ints(prefix_bits: np.ndarray, generator: np.ndarray) -> np.ndarray:
    """Parity section (as integers) of each row of payload-prefix bits."""
    if generator.shape[0] == 0:
        return np.zeros(prefix_bits.shape[0], dtype=np.int64)
    parity = (prefix_bits.astype(np.int64) @ generator.T.astype(np.int64)) & 1
    return _bit_rows_to_ints(parity)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def generate_parity_matrices(
    parity_profile: Sequence[int],
    data_bits: Sequence[int],
    seed: int,
) -> ParityMatrices:
    """Draw the parity generators deterministically from *seed*."""
    profile = tuple(int(p) for p in parity_profile)
    data = tuple(int(b) for b in data_bits)
    if len(profile) != len(data):
        raise ValueError("parity profile and data-bit blocks differ in length")
    index_bits = profile[0] + data[0]
    if any(p + b != index_bits for p, b in zip(profile, data, strict=True)):
        raise ValueError("every block must have p_l + b_l = J")
    blocks: dict[tuple[int, int], np.ndarray] = {}
    for sub, parity in enumerate(profile):
        if parity == 0:
            continue
        for prev in range(sub):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, sub, prev])))
            blocks[(sub, prev)] = rng.integers(0, 2, size=(parity, data[prev]), dtype=np.uint8)
    return ParityMatrices.from_blocks(index_bits, profile, blocks)


def encode_payload_bits(bits: np.ndarray, matrices: ParityMatrices) -> np.ndarray:
    """Encode a ``(K, b)`` bit array into a ``(K, L)`` array of subslot indices."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    if bits.shape[1] != matrices.payload_bits:
        raise ValueError(f"payload has {bits.shape[1]} bits, expected {matrices.payload_bits}")
    num_users = bits.shape[0]
    indices = np.empty((num_users, matrices.num_subslots), dtype=np.int64)
    offset = 0
    for sub, (width, parity) in enumerate(zip(matrices.data_bits, matrices.parity_bits, strict=True)):
        data = _bit_rows_to_ints(bits[:, offset:offset + width]) if width else np.zeros(num_users, dtype=np.int64)
        check = _parity_ints(bits[:, :offset], matrices.stacked[sub])
        indices[:, sub] = (data << parity) | check
        offset += width
    return indices


def tree_encode(payload: int | np.ndarray, matrices: ParityMatrices) -> MessagePath:
    """Encode one payload (integer or bit vector of length b) into its index path."""
    if isinstance(payload, np.ndarray):
        if payload.ndim != 1 or payload.size != matrices.payload_bits:
            raise ValueError(f"payload has {payload.size} bits, expected {matrices.payload_bits}")
        bits = payload.astype(np.uint8)
        value = bits_to_payload(bits)
    else:
        value = int(payload)
        bits = payload_to_bits(value, matrices.payload_bits)
    indices = encode_payload_bits(bits[None, :], matrices)[0]
    return MessagePath(payload=value, indices=tuple(int(i) for i in indices))


def parity_consistent(indices: Sequence[int], matrices: ParityMatrices) -> bool:
    """True when every parity section of *indices* matches its data prefix."""
    if len(indices) != matrices.num_subslots:
        return False
    prefix = np.zeros((1, 0), dtype=np.uint8)
    for sub, index in enumerate(indices):
        parity = matrices.parity_bits[sub]
        if index < 0 or index >> matrices.index_bits:
            return False
        if int(_parity_ints(prefix, matrices.stacked[sub])[0]) != index & ((1 << parity) - 1):
            return False
        data = _ints_to_bit_rows(np.array([index >> parity]), matrices.data_bits[sub])
        prefix = np.hstack([prefix, data])
    return True


def tree_decode(
    lists: Sequence[Iterable[int]],
    matrices: ParityMatrices,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> tuple[set[int], DecodeStats]:
    """Stitch per-subslot index lists into payloads.

    Stage ``l`` extends every surviving partial path by each index of ``S_l`` whose parity
    section equals the parity recomputed from the path's data bits. Returns the set of
    payloads whose paths survive all ``L`` stages together with the per-stage path counts.

    Raises :class:`PathOverflowError` when a stage would keep more than *max_paths* paths.
    """
    if len(lists) != matrices.num_subslots:
        raise ValueError(f"expected {matrices.num_subslots} lists, got {len(lists)}")
    if max_paths < 1:
        raise ValueError("max_paths must be >= 1")
    stats = DecodeStats()
    size = 1 << matrices.index_bits
    paths = np.zeros((1, 0), dtype=np.uint8)

    for sub, members in enumerate(lists):
        candidates = np.unique(np.fromiter((int(i) for i in members), dtype=np.int64))
        if candidates.size and (candidates[0] < 0 or candidates[-1] >= size):
            raise ValueError(f"list {sub + 1} holds indices outside [0, {size})")
        parity = matrices.parity_bits[sub]
        cand_parity = candidates & ((1 << parity) - 1)
        cand_data = candidates >> parity

        order = np.argsort(cand_parity, kind="stable")
        sorted_parity = cand_parity[order]
        expected = _parity_ints(paths, matrices.stacked[sub])
        lo = np.searchsorted(sorted_parity, expected, side="left")
        hi = np.searchsorted(sorted_parity, expected, side="right")
        counts = hi - lo
        total = int(counts.sum())
        stats.surviving.append(total)
        if total > max_paths:
            stats.overflow_stage = sub
            logger.warning("tree decoder overflow: %d paths at stage %d (cap %d)", total, sub + 1, max_paths)
            raise PathOverflowError(stage=sub, paths=total, stats=stats)

        parent = np.repeat(np.arange(paths.shape[0]), counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        chosen = cand_data[order[np.repeat(lo, counts) + within]]
        paths = np.hstack([paths[parent], _ints_to_bit_rows(chosen, matrices.data_bits[sub])])
        logger.debug("stage %d: %d candidates, %d surviving paths", sub + 1, candidates.size, total)
        if total == 0:
            stats.surviving.extend([0] * (matrices.num_subslots - sub - 1))
            return set(), stats

    payloads = {bits_to_payload(row) for row in paths}
    stats.duplicate_payloads = paths.shape[0] - len(payloads)
    return payloads, stats
