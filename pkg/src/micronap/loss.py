"""Frame-loss probability from corrupted duration fields.

Two error models over the 15 value bits of the duration/ID field: an
independent-bit model and the Neyman type-A burst model, where the
number of bursts and the bits per burst are both Poisson.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .exceptions import DomainError
from .frames import FrameRecord

DURATION_BITS = 15
# j!, lambda^j are evaluated through logs beyond this index
_LOG_SPACE_FROM = 12


@dataclass(frozen=True)
class ErrorModelParams:
    ber: float
    lambda_b: float

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise DomainError(f"ber must be in [0, 1], got {self.ber}")
        if not self.lambda_b > 0.0:
            raise DomainError(f"lambda_b must be > 0, got {self.lambda_b}")

    def bursts(self, n_bits: int = DURATION_BITS) -> float:
        """Mean number of bursts over ``n_bits`` bits."""
        return n_bits * self.ber / self.lambda_b


def ploss_single_bit(ber: float) -> float:
    if not 0.0 <= ber <= 1.0:
        raise DomainError(f"ber must be in [0, 1], got {ber}")
    # -expm1(15*log1p(-ber)) == 1 - (1-ber)**15 without cancellation
    if ber == 1.0:
        return 1.0
    return -math.expm1(DURATION_BITS * math.log1p(-ber))


def p_eg_fraction(duration: int) -> float:
    """Share of single-bit errors that lengthen ``duration`` (0 -> 1 flips)."""
    if not 0 <= duration < 0x8000:
        raise DomainError(f"{duration} is not a NAV duration value")
    return (DURATION_BITS - bin(duration).count("1")) / DURATION_BITS


def _weight(lam: float, j: int) -> float:
    """lam**j / j!"""
    if j <= _LOG_SPACE_FROM:
        return lam**j / math.factorial(j)
    return math.exp(j * math.log(lam) - math.lgamma(j + 1))


def neyman_pmf(n_bits: int, params: ErrorModelParams, k_max: int | None = None) -> list[float]:
    """[p_N(0), ..., p_N(k_max)] by the finite recursion."""
    if n_bits < 1:
        raise DomainError("n_bits must be >= 1")
    k_max = n_bits if k_max is None else k_max
    if k_max < 0:
        raise DomainError("k_max must be >= 0")
    lam_b = params.lambda_b
    lam_B = params.bursts(n_bits)
    pmf = [math.exp(-lam_B * -math.expm1(-lam_b))]
    if k_max == 0:
        return pmf
    weights = [_weight(lam_b, j) for j in range(k_max)]
    scale = lam_B * lam_b * math.exp(-lam_b)
    for k in range(1, k_max + 1):
        acc = math.fsum(weights[j] * pmf[k - 1 - j] for j in range(k))
        pmf.append(scale * acc / k)
    return pmf


def neyman_pk(n_bits: int, k: int, params: ErrorModelParams) -> float:
    if not 0 <= k <= n_bits:
        raise DomainError(f"k must be in [0, {n_bits}], got {k}")
    return neyman_pmf(n_bits, params, k)[k]


def ploss_neyman(params: ErrorModelParams) -> float:
    """Probability of 1..15 bit errors in the duration field."""
    pmf = neyman_pmf(DURATION_BITS, params)
    return math.fsum(pmf[1:])


@dataclass(frozen=True)
class DurationRow:
    duration: int
    percent: float
    p_eg_fraction: float


def duration_histogram(frames: Iterable[FrameRecord]) -> list[DurationRow]:
    """Most frequent NAV duration values, in descending share."""
    counts = Counter(f.duration_id.raw for f in frames if f.duration_id.is_nav)
    total = sum(counts.values())
    if not total:
        return []
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [DurationRow(d, 100.0 * n / total, p_eg_fraction(d)) for d, n in ranked]


def ber_grid(lo_exp: int = -8, hi_exp: int = -2, per_decade: int = 10) -> list[float]:
    """Log-spaced BER values from 10**lo_exp to 10**hi_exp inclusive."""
    steps = (hi_exp - lo_exp) * per_decade
    return [10.0 ** (lo_exp + i / per_decade) for i in range(steps + 1)]
