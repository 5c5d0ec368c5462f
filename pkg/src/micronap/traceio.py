"""Reading and writing frame traces.

Two formats are supported:

* ``pcap`` -- classic libpcap files (microsecond or nanosecond, either byte
  order) with radiotap (linktype 127) or bare 802.11 (linktype 105) frames.
* ``ndjson`` -- the normalized interchange format, one JSON object per line.
  See ``NDJSON_FIELDS`` and the README for the field-by-field description.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from pathlib import Path
from typing import Iterable

from .exceptions import ConfigError, TruncatedHeader, UnreadableFile
from .frames import DurationId, FrameRecord, MacAddress, encode_header, parse_header

log = logging.getLogger(__name__)

NDJSON_FIELDS = (
    "timestamp_us",  # int, us since trace epoch (radiotap TSFT when present)
    "rate",          # PHY rate in Mbps
    "len",           # PSDU length in bytes, FCS included
    "type",          # frame-control type (0 mgmt, 1 ctrl, 2 data)
    "subtype",       # frame-control subtype
    "flags",         # frame-control flags byte (bit0 to-DS, bit1 from-DS, ...)
    "duration_raw",  # 16-bit duration/ID field as transmitted
    "addr1",         # receiver address, "aa:bb:cc:dd:ee:ff"
    "addr2",         # transmitter address or null (ACK/CTS)
    "fcs_ok",        # false when the capture flagged a bad FCS
)

FORMATS = ("pcap", "ndjson")

DEFAULT_RATE_MBPS = 6

LINKTYPE_IEEE802_11 = 105
LINKTYPE_RADIOTAP = 127

_PCAP_MAGIC = {
    b"\xd4\xc3\xb2\xa1": ("<", 1),
    b"\xa1\xb2\xc3\xd4": (">", 1),
    b"\x4d\x3c\xb2\xa1": ("<", 1000),
    b"\xa1\xb2\x3c\x4d": (">", 1000),
}

# radiotap present bits and flags
RT_TSFT = 1 << 0
RT_FLAGS = 1 << 1
RT_RATE = 1 << 2
RT_EXT = 1 << 31
RT_F_FCS_AT_END = 0x10
RT_F_BAD_FCS = 0x40


def source_id_for(path: str | Path) -> str:
    return Path(path).stem


def _num(value: float):
    return int(value) if float(value).is_integer() else value


def record_to_json(rec: FrameRecord) -> dict:
    return {
        "timestamp_us": rec.timestamp_us,
        "rate": _num(rec.rate_mbps),
        "len": rec.psdu_len,
        "type": rec.ftype,
        "subtype": rec.subtype,
        "flags": rec.flags,
        "duration_raw": rec.duration_id.raw,
        "addr1": str(rec.addr1),
        "addr2": None if rec.addr2 is None else str(rec.addr2),
        "fcs_ok": rec.fcs_ok,
    }


def record_from_json(obj: dict, source_id: str = "") -> FrameRecord:
    missing = [k for k in NDJSON_FIELDS if k not in obj]
    if missing:
        raise ValueError(f"missing fields {missing}")
    addr2 = obj["addr2"]
    return FrameRecord(
        timestamp_us=int(obj["timestamp_us"]),
        rate_mbps=_num(obj["rate"]),
        psdu_len=int(obj["len"]),
        ftype=int(obj["type"]),
        subtype=int(obj["subtype"]),
        flags=int(obj["flags"]),
        duration_id=DurationId(int(obj["duration_raw"])),
        addr1=MacAddress.parse(obj["addr1"]),
        addr2=None if addr2 is None else MacAddress.parse(addr2),
        fcs_ok=bool(obj["fcs_ok"]),
        source_id=source_id,
    )


def write_ndjson(path: str | Path, records: Iterable[FrameRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def read_ndjson(path: str | Path, stats: Counter | None = None) -> list[FrameRecord]:
    stats = Counter() if stats is None else stats
    sid = source_id_for(path)
    out = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(record_from_json(json.loads(line), sid))
            except (ValueError, TypeError, KeyError) as exc:
                stats["malformed"] += 1
                log.debug("%s:%d skipped: %s", path, lineno, exc)
    stats["frames"] += len(out)
    return out


# -- pcap --------------------------------------------------------------------

def _parse_radiotap(pkt: bytes) -> tuple[int, int | None, int | None, int | None]:
    """Return (header_len, tsft, flags, rate_500kbps) from a radiotap header."""
    if len(pkt) < 8:
        raise TruncatedHeader("radiotap header shorter than 8 bytes")
    _version, _pad, rt_len, present = struct.unpack_from("<BBHI", pkt, 0)
    if rt_len > len(pkt) or rt_len < 8:
        raise TruncatedHeader("radiotap length exceeds captured bytes")
    offset = 8
    word = present
    while word & RT_EXT:
        if offset + 4 > rt_len:
            raise TruncatedHeader("radiotap present bitmap overruns header")
        (word,) = struct.unpack_from("<I", pkt, offset)
        offset += 4
    tsft = flags = rate = None
    if present & RT_TSFT:
        offset = (offset + 7) & ~7
        (tsft,) = struct.unpack_from("<Q", pkt, offset)
        offset += 8
    if present & RT_FLAGS:
        flags = pkt[offset]
        offset += 1
    if present & RT_RATE:
        rate = pkt[offset]
        offset += 1
    if offset > rt_len:
        raise TruncatedHeader("radiotap fields overrun header")
    return rt_len, tsft, flags, rate


def read_pcap(path: str | Path, stats: Counter | None = None) -> list[FrameRecord]:
    stats = Counter() if stats is None else stats
    sid = source_id_for(path)
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if len(blob) < 24 or blob[:4] not in _PCAP_MAGIC:
        raise UnreadableFile(f"{path}: not a libpcap file")
    endian, ts_div = _PCAP_MAGIC[blob[:4]]
    linktype = struct.unpack_from(endian + "I", blob, 20)[0] & 0x0FFFFFFF
    if linktype not in (LINKTYPE_RADIOTAP, LINKTYPE_IEEE802_11):
        raise UnreadableFile(f"{path}: unsupported linktype {linktype}")
    rec_hdr = struct.Struct(endian + "IIII")
    out = []
    pos = 24
    while pos + rec_hdr.size <= len(blob):
        ts_sec, ts_frac, caplen, origlen = rec_hdr.unpack_from(blob, pos)
        pos += rec_hdr.size
        pkt = blob[pos : pos + caplen]
        pos += caplen
        if len(pkt) < caplen:
            stats["truncated"] += 1
            break
        capture_us = ts_sec * 1_000_000 + ts_frac // ts_div
        try:
            rec = _pcap_record(pkt, origlen, capture_us, linktype, sid, stats)
        except TruncatedHeader:
            stats["truncated"] += 1
            continue
        out.append(rec)
    stats["frames"] += len(out)
    return out


def _pcap_record(pkt, origlen, capture_us, linktype, sid, stats) -> FrameRecord:
    if linktype == LINKTYPE_RADIOTAP:
        rt_len, tsft, flags, rate = _parse_radiotap(pkt)
    else:
        rt_len, tsft, flags, rate = 0, None, None, None
    if rate is None or rate == 0:
        stats["missing_rate"] += 1
        rate_mbps = DEFAULT_RATE_MBPS
    else:
        rate_mbps = _num(rate / 2)
    if flags is None:
        stats["missing_flags"] += 1
        flags = 0
    timestamp = tsft if tsft is not None else capture_us
    psdu_len = origlen - rt_len + (0 if flags & RT_F_FCS_AT_END else 4)
    return parse_header(
        pkt[rt_len : rt_len + 16],
        timestamp_us=timestamp,
        rate_mbps=rate_mbps,
        psdu_len=psdu_len,
        fcs_ok=not flags & RT_F_BAD_FCS,
        source_id=sid,
    )


def write_pcap(path: str | Path, records: Iterable[FrameRecord]) -> int:
    """Write header-only radiotap captures (snap length = MAC header).

    The original length carries the full PSDU so airtime survives the
    round trip. Each record gets TSFT, flags (FCS at end) and rate.
    """
    n = 0
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, LINKTYPE_RADIOTAP))
        for rec in records:
            rate_code = int(round(rec.rate_mbps * 2))
            flags = RT_F_FCS_AT_END | (0 if rec.fcs_ok else RT_F_BAD_FCS)
            rt = struct.pack("<BBHIQBB", 0, 0, 18, RT_TSFT | RT_FLAGS | RT_RATE, rec.timestamp_us, flags, rate_code)
            body = encode_header(rec)
            caplen = len(rt) + len(body)
            origlen = len(rt) + rec.psdu_len
            sec, usec = divmod(rec.timestamp_us, 1_000_000)
            fh.write(struct.pack("<IIII", sec, usec, caplen, origlen))
            fh.write(rt + body)
            n += 1
    return n


def read_trace(path: str | Path, fmt: str, stats: Counter | None = None) -> list[FrameRecord]:
    if fmt == "pcap":
        return read_pcap(path, stats)
    if fmt == "ndjson":
        return read_ndjson(path, stats)
    raise ConfigError(f"unknown trace format {fmt!r}; expected one of {FORMATS}")
