"""Closed-form analysis: sleep efficiency, minimum payload, clock power.

``l_min`` reproduces the published frame+ACK expansion verbatim: 14 MAC
header bytes plus a 4-byte FCS on the data frame, a single PLCP term and
16 bytes for the ACK. It is not the exact 802.11a airtime (see
``micronap.frames`` for that), and it is solved with rationals so the
inequality is tight to the byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .exceptions import SleepTooShort
from .frames import PHY_11A, PhyParams
from .hardware import HardwareProfile

MAX_PAYLOAD = 1500
MANDATORY_RATES = (6, 12, 24)

CLOCK_BASE_W = 0.91
CLOCK_SLOPE_W_PER_MHZ = 0.0051
# 11a (5 GHz, 20 MHz channel) reference clock of the AR9280
CLOCK_11A_MHZ = 40


def sleep_efficiency(profile: HardwareProfile, dt_sleep_us: float) -> float:
    if dt_sleep_us < profile.t_sleep_min_us or dt_sleep_us <= 0:
        raise SleepTooShort(f"{dt_sleep_us} us < minimum {profile.t_sleep_min_us} us")
    # one rounding only, so integer inputs give the correctly rounded ratio
    return (dt_sleep_us - profile.t_waste_us) / dt_sleep_us


def efficiency_curve(t_waste_us: float, dt_values: Iterable[float]) -> list[float]:
    """Efficiency for a bare waste time; NaN where the sleep is shorter than the waste."""
    return [(dt - t_waste_us) / dt if dt > 0 and dt >= t_waste_us else math.nan for dt in dt_values]


def default_ack_rate(data_rate: float) -> int:
    """Highest mandatory rate not above the data rate."""
    return max(r for r in MANDATORY_RATES if r <= data_rate)


@dataclass(frozen=True)
class ApplicabilityQuery:
    data_rate_mbps: float
    profile: HardwareProfile
    ack_rate_mbps: float | None = None
    phy: PhyParams = field(default=PHY_11A)
    max_payload: int = MAX_PAYLOAD

    def __post_init__(self):
        self.phy.dbps(self.data_rate_mbps)
        if self.ack_rate_mbps is None:
            object.__setattr__(self, "ack_rate_mbps", default_ack_rate(self.data_rate_mbps))
        self.phy.dbps(self.ack_rate_mbps)


def _q(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**6) if isinstance(x, float) else Fraction(x)


def exchange_time_us(payload: int, query: ApplicabilityQuery) -> Fraction:
    """Data + SIFS + PLCP + ACK + SIFS as in the published expansion, exactly."""
    phy = query.phy
    data = Fraction(8 * (14 + payload + 4)) / _q(query.data_rate_mbps)
    ack = Fraction(8 * (14 + 2)) / _q(query.ack_rate_mbps)
    return data + 2 * phy.sifs_us + phy.plcp_us + ack


def l_min(query: ApplicabilityQuery) -> int | None:
    """Smallest payload whose frame+ACK exchange lasts the minimum sleep.

    Returns None when that payload exceeds ``query.max_payload``.
    """
    target = Fraction(query.profile.t_sleep_min_us)
    fixed = exchange_time_us(0, query)
    if fixed >= target:
        return 0
    per_byte = Fraction(8) / _q(query.data_rate_mbps)
    need = math.ceil((target - fixed) / per_byte)
    # guard against an off-by-one in the closed form
    while need > 0 and exchange_time_us(need - 1, query) >= target:
        need -= 1
    while exchange_time_us(need, query) < target:
        need += 1
    return need if need <= query.max_payload else None


@dataclass(frozen=True)
class ApplicabilityRow:
    data_rate_mbps: float
    ack_rate_mbps: float
    l_min: int | None
    applicable_fraction: float


def applicability_table(
    profile: HardwareProfile,
    phy: PhyParams = PHY_11A,
    rate_pairs: Sequence[tuple[float, float]] | None = None,
    max_payload: int = MAX_PAYLOAD,
) -> list[ApplicabilityRow]:
    if rate_pairs is None:
        rate_pairs = [(r, default_ack_rate(r)) for r in phy.rates]
    rows = []
    for data_rate, ack_rate in rate_pairs:
        q = ApplicabilityQuery(data_rate, profile, ack_rate, phy, max_payload)
        lm = l_min(q)
        if lm is None:
            frac = 0.0
        else:
            frac = min(1.0, max(0.0, (max_payload - lm + 1) / (max_payload + 1)))
        rows.append(ApplicabilityRow(data_rate, ack_rate, lm, frac))
    return rows


def clock_power(f_mhz: float) -> float:
    """Reference-clock power regression, W."""
    if f_mhz < 0:
        raise ValueError("frequency must be >= 0")
    return CLOCK_BASE_W + CLOCK_SLOPE_W_PER_MHZ * f_mhz


def downclocked_idle_power(idle_w: float, clock_mhz: float = CLOCK_11A_MHZ, factor: float = 16) -> float:
    """Idle power after dividing the reference clock by ``factor``.

    Only the clock's frequency-dependent share changes; everything else in
    the measured idle power (including the regression intercept) stays.
    """
    return idle_w - (clock_power(clock_mhz) - clock_power(clock_mhz / factor))
