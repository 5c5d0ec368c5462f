import math
from fractions import Fraction

import pytest

from micronap.analysis import (
    ApplicabilityQuery,
    applicability_table,
    clock_power,
    default_ack_rate,
    downclocked_idle_power,
    efficiency_curve,
    exchange_time_us,
    l_min,
    sleep_efficiency,
)
from micronap.exceptions import SleepTooShort, UnknownRate
from micronap.hardware import default_ar9280

HW = default_ar9280()

# independently hand-solved: ceil of (300 - fixed) * rate / 8 with the
# 18 header/FCS bytes, 2 SIFS, one PLCP and a 16-byte ACK
EXPECTED_LMIN = {6: 152, 9: 237, 12: 338, 18: 516, 24: 710, 36: 1074, 48: 1438, 54: None}


def test_efficiency_values():
    assert sleep_efficiency(HW, 300) == 1 / 6
    assert sleep_efficiency(HW, 1000) == 0.75
    with pytest.raises(SleepTooShort):
        sleep_efficiency(HW, 299)


def test_efficiency_curve():
    curve = efficiency_curve(250, [100, 250, 500, 1000])
    assert math.isnan(curve[0])
    assert curve[1:] == [0.0, 0.5, 0.75]
    assert efficiency_curve(0, [300]) == [1.0]


def test_default_ack_rates():
    assert [default_ack_rate(r) for r in (6, 9, 12, 18, 24, 36, 48, 54)] == [6, 6, 12, 12, 24, 24, 24, 24]


@pytest.mark.parametrize("rate", sorted(EXPECTED_LMIN))
def test_l_min_values_and_tightness(rate):
    q = ApplicabilityQuery(rate, HW)
    got = l_min(q)
    assert got == EXPECTED_LMIN[rate]
    if got is not None:
        assert exchange_time_us(got, q) >= 300 > exchange_time_us(got - 1, q)


def test_l_min_6mbps_fraction():
    q = ApplicabilityQuery(6, HW)
    # 8 * (18 + l) / 6 + 32 + 20 + 128 / 6 >= 300  <=>  l >= 151.25 + ... -> 152
    assert exchange_time_us(152, q) == Fraction(8 * 170, 6) + 52 + Fraction(128, 6)


def test_l_min_54_not_applicable_beyond_max_payload():
    q = ApplicabilityQuery(54, HW)
    assert l_min(q) is None
    assert l_min(ApplicabilityQuery(54, HW, max_payload=2000)) == 1620


def test_l_min_zero_when_overhead_alone_suffices():
    assert l_min(ApplicabilityQuery(6, HW.replace(t_ready_us=0, t_off_us=0, t_on_us=90))) == 0


def test_unknown_rate_rejected():
    with pytest.raises(UnknownRate):
        ApplicabilityQuery(11, HW)


def test_applicability_table():
    rows = {r.data_rate_mbps: r for r in applicability_table(HW)}
    assert rows[6].l_min == 152
    assert rows[6].applicable_fraction == pytest.approx((1500 - 152 + 1) / 1501)
    assert rows[54].applicable_fraction == 0.0
    fractions = [rows[r].applicable_fraction for r in sorted(rows)]
    assert fractions == sorted(fractions, reverse=True)


def test_clock_power():
    assert clock_power(0) == pytest.approx(0.91)
    assert clock_power(88) == pytest.approx(1.3588)
    with pytest.raises(ValueError):
        clock_power(-1)


def test_downclock():
    p = downclocked_idle_power(1.292)
    assert p == pytest.approx(1.292 - 0.0051 * (40 - 2.5))
    assert abs(p - 1.10) < 0.02
