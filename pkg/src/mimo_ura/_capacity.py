"""Closed-form design calculators for the concatenated scheme.

All entropies are in bits. The constants ``c`` (inner-decoder user limit) and ``kappa``
(NNLS error bound) are unnormalised and default to 1; every report carries them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy.special import entr


@dataclass(frozen=True)
class DesignPoint:
    """Operating point of the design calculators; ``ebn0`` is linear."""

    index_bits: int
    outer_rate: float
    num_subslots: int
    n: int
    active_users: int
    ebn0: float
    c: float = 1.0
    kappa: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.outer_rate <= 1:
            raise ValueError(f"outer_rate must lie in (0, 1], got {self.outer_rate}")
        if self.index_bits < 1:
            raise ValueError("index_bits must be >= 1")
        if self.c <= 0 or self.kappa <= 0:
            raise ValueError("c and kappa must be > 0")
        if self.num_subslots < 1 or self.n < 1:
            raise ValueError("n and num_subslots must be >= 1")
        if self.active_users < 0:
            raise ValueError("active_users must be >= 0")


@dataclass(frozen=True)
class SumRateCheck:
    feasible: bool
    margin: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class AntennaRequirement:
    """Up-to-constant order of the antenna count; ``antennas_order`` is not an exact M."""

    phi: float
    antennas_order: float


def binary_entropy(q: float) -> float:
    """``H_2(q)`` in bits."""
    return float((entr(q) + entr(1.0 - q)) / math.log(2))


def zero_row_probability(index_bits: int, active_users: int) -> float:
    """Probability that a given codebook column is unused: ``(1 - 2^-J)^K_a``."""
    return math.exp(active_users * math.log1p(-(2.0 ** -index_bits)))


def or_mac_entropy_bound(index_bits: int, active_users: int) -> float:
    """``2^J H_2((1 - 2^-J)^K_a)``: output entropy bound of the vector OR channel."""
    if active_users == 0:
        return 0.0
    return (1 << index_bits) * binary_entropy(zero_row_probability(index_bits, active_users))


def approximate_or_mac_entropy(index_bits: int, active_users: int) -> float:
    """Large-``2^J`` approximation ``K_a (1 + J - log2 K_a)``."""
    if active_users == 0:
        return 0.0
    return active_users * (1 + index_bits - math.log2(active_users))


def sum_rate_feasible(index_bits: int, outer_rate: float, active_users: int, *, exact: bool = True) -> SumRateCheck:
    """Necessary condition ``K_a J R_out <= 2^J H_2((1 - 2^-J)^K_a)``; margin = RHS - LHS."""
    lhs = active_users * index_bits * outer_rate
    if exact:
        rhs = or_mac_entropy_bound(index_bits, active_users)
    else:
        rhs = approximate_or_mac_entropy(index_bits, active_users)
    margin = rhs - lhs
    return SumRateCheck(feasible=margin >= 0, margin=margin, lhs=lhs, rhs=rhs)


def outer_user_cap(index_bits: int, outer_rate: float) -> float:
    """Approximate outer-code limit ``2^(J (1 - R_out) + 1)``."""
    return 2.0 ** (index_bits * (1 - outer_rate) + 1)


def exact_outer_user_cap(index_bits: int, outer_rate: float) -> int:
    """Largest ``K_a`` satisfying the exact sum-rate condition (bracketing + bisection)."""
    if not sum_rate_feasible(index_bits, outer_rate, 1).feasible:
        return 0
    lo, hi = 1, 2
    ceiling = 1 << (index_bits + 16)
    while sum_rate_feasible(index_bits, outer_rate, hi).feasible:
        lo, hi = hi, hi * 2
        if hi > ceiling:
            return ceiling
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sum_rate_feasible(index_bits, outer_rate, mid).feasible:
            lo = mid
        else:
            hi = mid
    return lo


def inner_user_cap(n: int, num_subslots: int, c: float = 1.0) -> float:
    """Inner-decoder limit ``c n^2 / L^2``."""
    return c * n * n / (num_subslots * num_subslots)


def max_active_users(index_bits: int, outer_rate: float, n: int, num_subslots: int, c: float = 1.0) -> int:
    """``floor(min(c n^2 / L^2, 2^(J (1 - R_out) + 1)))``."""
    return math.floor(min(inner_user_cap(n, num_subslots, c), outer_user_cap(index_bits, outer_rate)))


def large_n_regime(index_bits: int, outer_rate: float, n: int, num_subslots: int, c: float = 1.0) -> bool:
    """True when the outer code, not the inner decoder, limits the number of users."""
    return inner_user_cap(n, num_subslots, c) >= outer_user_cap(index_bits, outer_rate)


def phi(index_bits: int, outer_rate: float, c: float = 1.0) -> float:
    """``sqrt(c) J R_out / 2^(J (1 - R_out) / 2 + 1/2)``, the bound ``P/N0 <= Eb/N0 * phi``."""
    return math.sqrt(c) * index_bits * outer_rate / 2.0 ** (index_bits * (1 - outer_rate) / 2 + 0.5)


def antenna_requirement(design: DesignPoint) -> AntennaRequirement:
    """Order of ``M`` needed: ``max((Eb/N0 * phi)^-2, K_a)``, up to constants."""
    if design.ebn0 <= 0:
        raise ValueError("ebn0 must be > 0")
    factor = phi(design.index_bits, design.outer_rate, design.c)
    return AntennaRequirement(phi=factor, antennas_order=max((design.ebn0 * factor) ** -2, design.active_users))


def nnls_error_bound(snr: float, antennas: int, active_users: int, gamma_norm: float, kappa: float = 1.0) -> float:
    """``kappa ((P/N0)^-1 / sqrt(M) + sqrt(K_a / M) ||gamma||_2)``."""
    if snr <= 0 or antennas <= 0:
        raise ValueError("snr and antennas must be > 0")
    return kappa * (1.0 / (snr * math.sqrt(antennas)) + math.sqrt(active_users / antennas) * gamma_norm)


def design_report(design: DesignPoint) -> dict[str, Any]:
    """Every calculator evaluated at *design*, JSON-serialisable."""
    exact = sum_rate_feasible(design.index_bits, design.outer_rate, design.active_users)
    approx = sum_rate_feasible(design.index_bits, design.outer_rate, design.active_users, exact=False)
    antennas = antenna_requirement(design)
    return {
        "design": asdict(design),
        "ebn0_db": 10 * math.log10(design.ebn0),
        "or_mac_entropy_bits": exact.rhs,
        "or_mac_entropy_approx_bits": approx.rhs,
        "sum_rate": {
            "lhs_bits": exact.lhs,
            "margin_bits": exact.margin,
            "feasible": exact.feasible,
            "approx_margin_bits": approx.margin,
            "approx_feasible": approx.feasible,
        },
        "user_caps": {
            "inner": inner_user_cap(design.n, design.num_subslots, design.c),
            "outer_approx": outer_user_cap(design.index_bits, design.outer_rate),
            "outer_exact": exact_outer_user_cap(design.index_bits, design.outer_rate),
            "max_active_users": max_active_users(
                design.index_bits, design.outer_rate, design.n, design.num_subslots, design.c,
            ),
            "large_n_regime": large_n_regime(
                design.index_bits, design.outer_rate, design.n, design.num_subslots, design.c,
            ),
        },
        "antennas": {
            "phi": antennas.phi,
            "order": antennas.antennas_order,
            "note": "order of magnitude only, up to the unnormalised constants c and kappa",
        },
        "constants": {"c": design.c, "kappa": design.kappa},
        "zero_row_probability": zero_row_probability(design.index_bits, design.active_users),
        "spectral_efficiency": design.index_bits * design.num_subslots / design.n
        * design.outer_rate * design.active_users,
    }


def format_report(report: dict[str, Any]) -> str:
    """Aligned text rendering of :func:`design_report`."""
    rows: list[tuple[str, str]] = []

    def walk(prefix: str, value: Any) -> None:
        if isinstance(value, dict):
            for key, item in value.items():
                walk(f"{prefix}.{key}" if prefix else key, item)
        elif isinstance(value, float | np.floating):
            rows.append((prefix, f"{value:.6g}"))
        else:
            rows.append((prefix, str(value)))

    walk("", report)
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name.ljust(width)}  {text}" for name, text in rows)
