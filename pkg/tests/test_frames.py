import pickle

import pytest
from hypothesis import given, strategies as st

import oracle
from micronap.exceptions import TruncatedHeader, UnknownRate
from micronap.frames import (
    BROADCAST,
    PHY_11A,
    DurationClass,
    DurationId,
    FrameKind,
    FrameRecord,
    MacAddress,
    ack_duration_us,
    decision_header_bytes,
    encode_header,
    frame_airtime_us,
    header_decision_time_us,
    is_valid_rate,
    parse_header,
)

RATES = st.sampled_from(PHY_11A.rates)
MACS = st.binary(min_size=6, max_size=6).map(MacAddress)


def test_airtime_known_values():
    assert frame_airtime_us(1500, 6) == 2024
    assert frame_airtime_us(14, 24) == 28
    assert frame_airtime_us(14, 6) == 44
    assert frame_airtime_us(1500, 54) == 20 + 4 * 56


@given(st.integers(0, 4095), RATES)
def test_airtime_matches_symbol_counting(length, rate):
    assert frame_airtime_us(length, rate) == oracle.airtime(length, rate)


@given(st.integers(0, 2000), RATES)
def test_airtime_monotone_in_length(length, rate):
    assert frame_airtime_us(length + 1, rate) >= frame_airtime_us(length, rate)


def test_header_decision_time():
    # 16 header bytes at 6 Mbps: 144 bits over 24 bits/symbol = 6 symbols
    assert header_decision_time_us(16, 6) == 44
    assert header_decision_time_us(10, 6) == 20 + 4 * 4
    for rate in PHY_11A.rates:
        assert header_decision_time_us(16, rate) <= frame_airtime_us(16, rate)


def test_ack_duration_per_rate():
    assert [ack_duration_us(r) for r in (24, 6, 12)] == [44, 60, 48]


def test_unknown_rate():
    with pytest.raises(UnknownRate):
        frame_airtime_us(100, 5.5)
    assert not is_valid_rate(11)
    assert is_valid_rate(54)


@pytest.mark.parametrize(
    "raw, kind",
    [(0, DurationClass.NAV), (32767, DurationClass.NAV), (32768, DurationClass.CFP_FIXED),
     (40000, DurationClass.CFP_FIXED), (49151, DurationClass.CFP_FIXED),
     (49152, DurationClass.PS_POLL_AID), (65535, DurationClass.PS_POLL_AID)],
)
def test_duration_classes(raw, kind):
    d = DurationId(raw)
    assert d.kind is kind
    assert d.is_nav == (kind is DurationClass.NAV)
    assert d.nav_us == (raw if d.is_nav else None)


@given(st.integers(0, 0xFFFF))
def test_duration_classes_partition(raw):
    assert DurationId(raw).kind in DurationClass


def test_duration_range():
    with pytest.raises(ValueError):
        DurationId(0x10000)
    with pytest.raises(ValueError):
        DurationId(-1)


def test_frame_kinds():
    assert FrameKind.from_type(0, 8) is FrameKind.BEACON
    assert FrameKind.from_type(0, 4) is FrameKind.MANAGEMENT
    assert FrameKind.from_type(1, 11) is FrameKind.RTS
    assert FrameKind.from_type(1, 12) is FrameKind.CTS
    assert FrameKind.from_type(1, 13) is FrameKind.ACK
    assert FrameKind.from_type(1, 14) is FrameKind.CF_END
    assert FrameKind.from_type(2, 0) is FrameKind.DATA
    assert FrameKind.from_type(2, 2) is FrameKind.CF_POLL
    assert FrameKind.from_type(2, 8) is FrameKind.DATA
    assert FrameKind.from_type(3, 0) is FrameKind.OTHER
    assert not FrameKind.ACK.has_addr2


def test_mac_address():
    m = MacAddress.parse("02:00:00:00:01:0A")
    assert str(m) == "02:00:00:00:01:0a"
    assert MacAddress.parse("02-00-00-00-01-0a") == m
    assert not m.is_multicast
    assert BROADCAST.is_multicast and BROADCAST.is_broadcast
    assert pickle.loads(pickle.dumps(m)) == m
    with pytest.raises(AttributeError):
        m.octets = b"\0" * 6
    with pytest.raises(ValueError):
        MacAddress.parse("02:00:00")


def _record(ftype, subtype, flags, raw, a1, a2, length=200):
    return FrameRecord(0, 6, length, ftype, subtype, flags, DurationId(raw), a1, a2)


@given(
    st.sampled_from([(0, 8), (0, 0), (1, 11), (2, 0), (2, 2), (2, 8)]),
    st.integers(0, 255),
    st.integers(0, 0xFFFF),
    MACS,
    MACS,
)
def test_header_round_trip(kind, flags, raw, a1, a2):
    rec = _record(*kind, flags, raw, a1, a2)
    data = encode_header(rec)
    assert len(data) == 16
    back = parse_header(data, timestamp_us=0, rate_mbps=6, psdu_len=200)
    assert back == rec


@given(st.sampled_from([12, 13]), st.integers(0, 0x7FFF), MACS)
def test_ack_cts_have_no_addr2(subtype, raw, a1):
    rec = _record(1, subtype, 0, raw, a1, None, length=14)
    data = encode_header(rec)
    assert len(data) == 10
    # trailing bytes (e.g. the FCS) are not read as a transmitter address
    back = parse_header(data + b"\x11" * 6, timestamp_us=0, rate_mbps=6, psdu_len=14)
    assert back == rec
    assert decision_header_bytes(back) == 10


def test_truncated_header():
    with pytest.raises(TruncatedHeader):
        parse_header(b"\x00" * 9, timestamp_us=0, rate_mbps=6)


def test_short_frame_decides_on_ten_bytes():
    a = MacAddress.parse("02:00:00:00:00:01")
    assert decision_header_bytes(_record(2, 0, 1, 0, a, a, length=200)) == 16
    assert decision_header_bytes(_record(2, 0, 1, 0, a, a, length=12)) == 10
