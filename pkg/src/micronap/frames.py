"""802.11 frame records, duration/ID decoding and 802.11a OFDM airtime.

All times are integer microseconds. Airtime arithmetic includes the
16 SERVICE bits and 6 tail bits of the OFDM DATA field.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Mapping

from .exceptions import TruncatedHeader, UnknownRate

# frame-control flags byte
FC_TO_DS = 0x01
FC_FROM_DS = 0x02
FC_MORE_FRAG = 0x04
FC_RETRY = 0x08
FC_PWR_MGT = 0x10

MIN_HEADER_BYTES = 10
FULL_HEADER_BYTES = 16
FCS_BYTES = 4

SERVICE_BITS = 16
TAIL_BITS = 6

CFP_DURATION = 0x8000


class MacAddress:
    """Six-octet IEEE MAC address, compared byte-wise."""

    __slots__ = ("octets",)

    def __init__(self, octets: bytes):
        octets = bytes(octets)
        if len(octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(octets)}")
        object.__setattr__(self, "octets", octets)

    def __setattr__(self, name, value):
        raise AttributeError("MacAddress is immutable")

    def __reduce__(self):
        return (MacAddress, (self.octets,))

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.replace("-", ":").split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    def __eq__(self, other):
        if not isinstance(other, MacAddress):
            return NotImplemented
        return self.octets == other.octets

    def __lt__(self, other):
        return self.octets < other.octets

    def __hash__(self):
        return hash(self.octets)

    def __str__(self):
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self):
        return f"MacAddress('{self}')"


BROADCAST = MacAddress(b"\xff" * 6)


class DurationClass(enum.Enum):
    NAV = "nav"
    CFP_FIXED = "cfp"
    PS_POLL_AID = "aid"


@dataclass(frozen=True, slots=True)
class DurationId:
    raw: int

    def __post_init__(self):
        if not 0 <= self.raw <= 0xFFFF:
            raise ValueError(f"duration/ID must be 16-bit, got {self.raw}")

    @property
    def kind(self) -> DurationClass:
        # Bit 15 clear: a NAV duration. Bits 15,14 set: PS-Poll AID.
        # Everything else (32768 plus the reserved 32769..49151) is
        # folded into CFP_FIXED; none of it carries a usable duration.
        if not self.raw & 0x8000:
            return DurationClass.NAV
        if self.raw & 0x4000:
            return DurationClass.PS_POLL_AID
        return DurationClass.CFP_FIXED

    @property
    def is_nav(self) -> bool:
        return not self.raw & 0x8000

    @property
    def nav_us(self) -> int | None:
        return self.raw if self.is_nav else None


class FrameKind(enum.Enum):
    DATA = "data"
    MANAGEMENT = "mgmt"
    BEACON = "beacon"
    RTS = "rts"
    CTS = "cts"
    ACK = "ack"
    CF_POLL = "cfpoll"
    CF_END = "cfend"
    OTHER = "other"

    @classmethod
    def from_type(cls, ftype: int, subtype: int) -> "FrameKind":
        if ftype == 0:
            return cls.BEACON if subtype == 8 else cls.MANAGEMENT
        if ftype == 1:
            return _CONTROL_KINDS.get(subtype, cls.OTHER)
        if ftype == 2:
            # CF-Poll bit of the data subtype field
            return cls.CF_POLL if subtype & 0x2 else cls.DATA
        return cls.OTHER

    @property
    def has_addr2(self) -> bool:
        return self not in (FrameKind.ACK, FrameKind.CTS)


_CONTROL_KINDS = {
    11: FrameKind.RTS,
    12: FrameKind.CTS,
    13: FrameKind.ACK,
    14: FrameKind.CF_END,
    15: FrameKind.CF_END,
}


@dataclass(frozen=True, slots=True)
class FrameRecord:
    """One observed frame. ``psdu_len`` counts the FCS."""

    timestamp_us: int
    rate_mbps: float
    psdu_len: int
    ftype: int
    subtype: int
    flags: int
    duration_id: DurationId
    addr1: MacAddress
    addr2: MacAddress | None = None
    fcs_ok: bool = True
    source_id: str = ""
    kind: FrameKind = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", FrameKind.from_type(self.ftype, self.subtype))

    @property
    def to_ds(self) -> bool:
        return bool(self.flags & FC_TO_DS)

    @property
    def from_ds(self) -> bool:
        return bool(self.flags & FC_FROM_DS)

    @property
    def more_frag(self) -> bool:
        return bool(self.flags & FC_MORE_FRAG)

    @property
    def retry(self) -> bool:
        return bool(self.flags & FC_RETRY)


@dataclass(frozen=True)
class PhyParams:
    sifs_us: int = 16
    difs_us: int = 34
    slot_us: int = 9
    plcp_us: int = 20
    symbol_us: int = 4
    bits_per_symbol: Mapping[float, int] = field(
        default_factory=lambda: {6: 24, 9: 36, 12: 48, 18: 72, 24: 96, 36: 144, 48: 192, 54: 216}
    )

    @property
    def rates(self) -> list[float]:
        return sorted(self.bits_per_symbol)

    def dbps(self, rate_mbps: float) -> int:
        try:
            return self.bits_per_symbol[rate_mbps]
        except (KeyError, TypeError):
            raise UnknownRate(f"no OFDM mapping for {rate_mbps} Mbps") from None


PHY_11A = PhyParams()


def _symbols(bits: int, dbps: int) -> int:
    return -(-bits // dbps)


def frame_airtime_us(psdu_len: int, rate_mbps: float, phy: PhyParams = PHY_11A) -> int:
    bits = SERVICE_BITS + 8 * psdu_len + TAIL_BITS
    return phy.plcp_us + phy.symbol_us * _symbols(bits, phy.dbps(rate_mbps))


def header_decision_time_us(header_bytes: int, rate_mbps: float, phy: PhyParams = PHY_11A) -> int:
    """Airtime from frame start until ``header_bytes`` MAC bytes are demodulated."""
    bits = SERVICE_BITS + 8 * header_bytes
    return phy.plcp_us + phy.symbol_us * _symbols(bits, phy.dbps(rate_mbps))


def decision_header_bytes(record: FrameRecord) -> int:
    """16 when the frame carries a transmitter address, otherwise 10."""
    if record.kind.has_addr2 and record.psdu_len >= FULL_HEADER_BYTES:
        return FULL_HEADER_BYTES
    return MIN_HEADER_BYTES


def parse_header(
    data: bytes,
    *,
    timestamp_us: int,
    rate_mbps: float,
    psdu_len: int | None = None,
    fcs_ok: bool = True,
    source_id: str = "",
) -> FrameRecord:
    """Decode the first 16 MAC bytes into a FrameRecord.

    ``psdu_len`` defaults to ``len(data)``; pass the on-air length when the
    capture was truncated. ACK and CTS frames never carry addr2.
    """
    if len(data) < MIN_HEADER_BYTES:
        raise TruncatedHeader(f"{len(data)} bytes, need {MIN_HEADER_BYTES}")
    fc0, fc1, duration = struct.unpack_from("<BBH", data, 0)
    ftype = (fc0 >> 2) & 0x3
    subtype = (fc0 >> 4) & 0xF
    addr1 = MacAddress(data[4:10])
    addr2 = None
    if len(data) >= FULL_HEADER_BYTES and FrameKind.from_type(ftype, subtype).has_addr2:
        addr2 = MacAddress(data[10:16])
    return FrameRecord(
        timestamp_us=timestamp_us,
        rate_mbps=rate_mbps,
        psdu_len=len(data) if psdu_len is None else psdu_len,
        ftype=ftype,
        subtype=subtype,
        flags=fc1,
        duration_id=DurationId(duration),
        addr1=addr1,
        addr2=addr2,
        fcs_ok=fcs_ok,
        source_id=source_id,
    )


def encode_header(record: FrameRecord) -> bytes:
    """Inverse of parse_header: 16 bytes, or 10 when addr2 is absent."""
    fc0 = (record.subtype << 4) | (record.ftype << 2)
    out = struct.pack("<BBH", fc0, record.flags, record.duration_id.raw) + record.addr1.octets
    if record.addr2 is not None:
        out += record.addr2.octets
    return out


def frame_end_us(record: FrameRecord, phy: PhyParams = PHY_11A) -> int:
    return record.timestamp_us + frame_airtime_us(record.psdu_len, record.rate_mbps, phy)


def ack_duration_us(rate_mbps: float, phy: PhyParams = PHY_11A) -> int:
    """SIFS plus a 14-byte ACK: the usual duration value of a unicast data frame."""
    return phy.sifs_us + frame_airtime_us(14, rate_mbps, phy)


def is_valid_rate(rate_mbps: float, phy: PhyParams = PHY_11A) -> bool:
    return rate_mbps in phy.bits_per_symbol
