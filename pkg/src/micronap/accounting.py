"""Trace-driven state accounting for every station in a capture.

For each station the timeline is labelled, microsecond by microsecond,
with the highest-priority state that applies:

    tx > rx > overhearing > idle            (baseline)

and in the micro-sleep variant any overhearing/idle microsecond covered by
a doze is relabelled waste (falling edge and ready period) or sleep. Only
time while the station is online, or inside a frame that started while it
was online, is counted. Everything is integer microseconds, so the sweep
below is exact.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .engine import (
    RESPONSE_SLACK_US,
    Doze,
    StationContext,
    Stay,
    StayReason,
    describe,
    doze_phases,
    on_frame,
    track_contention,
)
from .exceptions import NonMonotonicTimestamps, TraceError, UnknownRate
from .frames import PHY_11A, FrameKind, FrameRecord, MacAddress, PhyParams, frame_airtime_us
from .hardware import HardwareProfile
from .traceio import read_trace

log = logging.getLogger(__name__)

US_PER_S = 1_000_000
DEFAULT_ONLINE_THRESHOLD_S = 300
BATTERY_V = 3.7
UJ_PER_MWH = 3.6e6

STATES = ("tx_us", "rx_us", "ov_us", "sleep_us", "waste_us", "idle_us")
VARIANTS = ("baseline", "unap")


@dataclass
class StateTimes:
    tx_us: int = 0
    rx_us: int = 0
    ov_us: int = 0
    sleep_us: int = 0
    waste_us: int = 0
    idle_us: int = 0

    @property
    def activity_us(self) -> int:
        return self.tx_us + self.rx_us + self.ov_us + self.sleep_us + self.waste_us

    @property
    def total_us(self) -> int:
        return self.activity_us + self.idle_us

    def __add__(self, other: "StateTimes") -> "StateTimes":
        return StateTimes(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in STATES}


@dataclass(frozen=True)
class StationIdentity:
    mac: MacAddress
    bssid: MacAddress
    is_ap: bool = False


@dataclass
class ActivityLedger:
    mac: MacAddress
    bssid: MacAddress | None
    baseline: StateTimes = field(default_factory=StateTimes)
    unap: StateTimes = field(default_factory=StateTimes)
    dozes: int = 0
    missed_frames: int = 0
    # (last_seen_us, source_id): picks the BSSID when merging files
    seen: tuple[int, str] = (0, "")

    def variant(self, name: str) -> StateTimes:
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}")
        return getattr(self, name)

    def merge(self, other: "ActivityLedger") -> "ActivityLedger":
        if other.mac != self.mac:
            raise ValueError("cannot merge ledgers of different stations")
        latest = max((self.seen, str(self.bssid)), (other.seen, str(other.bssid)))
        bssid = self.bssid if (self.seen, str(self.bssid)) == latest else other.bssid
        return ActivityLedger(
            mac=self.mac,
            bssid=bssid,
            baseline=self.baseline + other.baseline,
            unap=self.unap + other.unap,
            dozes=self.dozes + other.dozes,
            missed_frames=self.missed_frames + other.missed_frames,
            seen=latest[0],
        )


class OnlineTracker:
    """A station is online at t iff it transmitted within (t - threshold, t]."""

    def __init__(self, threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S):
        self.threshold_us = threshold_us
        self._last_tx: dict[MacAddress, int] = {}

    def observe(self, mac: MacAddress, t_us: int) -> None:
        prev = self._last_tx.get(mac)
        if prev is None or t_us > prev:
            self._last_tx[mac] = t_us

    def is_online(self, mac: MacAddress, t_us: int) -> bool:
        last = self._last_tx.get(mac)
        return last is not None and last <= t_us < last + self.threshold_us

    def windows(self, tx_times: Sequence[int], span_end: int) -> list[tuple[int, int]]:
        """Merged online intervals for sorted transmit instants, clipped at ``span_end``."""
        out: list[list[int]] = []
        for t in tx_times:
            end = min(t + self.threshold_us, span_end)
            if end <= t:
                continue
            if out and t <= out[-1][1]:
                out[-1][1] = max(out[-1][1], end)
            else:
                out.append([t, end])
        return [(a, b) for a, b in out]


class Frame(NamedTuple):
    start: int
    end: int
    ta: MacAddress | None  # transmitter, inferred for ACK/CTS
    rec: FrameRecord


# -- preparation ---------------------------------------------------------------

def prepare(records: Sequence[FrameRecord], phy: PhyParams = PHY_11A, stats: Counter | None = None) -> list[Frame]:
    """Check ordering, compute airtime and attribute ACK/CTS transmitters.

    Frames at rates without an OFDM mapping are dropped and counted.
    """
    stats = Counter() if stats is None else stats
    prev_ts = None
    timed = []
    for rec in records:
        if prev_ts is not None and rec.timestamp_us < prev_ts:
            raise NonMonotonicTimestamps(
                f"{rec.source_id or 'trace'}: timestamp {rec.timestamp_us} after {prev_ts}"
            )
        prev_ts = rec.timestamp_us
        try:
            airtime = frame_airtime_us(rec.psdu_len, rec.rate_mbps, phy)
        except UnknownRate:
            stats["unknown_rate"] += 1
            continue
        timed.append((rec, rec.timestamp_us + airtime))
    tas = infer_transmitters(timed, phy)
    return [Frame(rec.timestamp_us, end, ta, rec) for (rec, end), ta in zip(timed, tas)]


def infer_transmitters(timed: Sequence[tuple[FrameRecord, int]], phy: PhyParams = PHY_11A, lookback: int = 8) -> list[MacAddress | None]:
    """Transmitter of each frame; ACK/CTS are matched to the frame they answer.

    An ACK or CTS addressed to X that starts one SIFS after a recent frame
    sent by X came from that frame's receiver. An unmatched CTS is taken to
    be CTS-to-self; an unmatched ACK stays unattributed.
    """
    recent: deque[tuple[FrameRecord, int]] = deque(maxlen=lookback)
    out = []
    for rec, end in timed:
        ta = rec.addr2
        if ta is None:
            for prev, prev_end in reversed(recent):
                if (
                    prev.addr2 == rec.addr1
                    and not prev.addr1.is_multicast
                    and abs(rec.timestamp_us - prev_end - phy.sifs_us) <= RESPONSE_SLACK_US
                ):
                    ta = prev.addr1
                    break
            else:
                if rec.kind is FrameKind.CTS:
                    ta = rec.addr1
        out.append(ta)
        recent.append((rec, end))
    return out


# -- discovery -------------------------------------------------------------------

@dataclass
class Discovery:
    stations: dict[MacAddress, StationIdentity]
    aps: set[MacAddress]
    unassociated: set[MacAddress]

    @property
    def identities(self) -> list[StationIdentity]:
        aps = [StationIdentity(m, m, True) for m in self.aps]
        return sorted(list(self.stations.values()) + aps, key=lambda s: s.mac)


def discover(frames: Iterable[Frame]) -> Discovery:
    """Find APs and map every associated station to its BSSID.

    Only frames with a good FCS are trusted. When a station shows up with
    several BSSIDs in one trace, the most recent association wins.
    """
    frames = [f for f in frames if f.rec.fcs_ok]
    aps: set[MacAddress] = set()
    for f in frames:
        rec = f.rec
        if rec.kind is FrameKind.BEACON and rec.addr2 is not None:
            aps.add(rec.addr2)
        elif rec.kind in (FrameKind.DATA, FrameKind.CF_POLL):
            if rec.from_ds and not rec.to_ds and rec.addr2 is not None:
                aps.add(rec.addr2)
            elif rec.to_ds and not rec.from_ds and not rec.addr1.is_multicast:
                aps.add(rec.addr1)

    bssid_of: dict[MacAddress, MacAddress] = {}
    transmitters: set[MacAddress] = set()

    def link(sta, ap):
        if sta is not None and ap is not None and sta not in aps and not sta.is_multicast:
            bssid_of[sta] = ap

    for f in frames:
        rec = f.rec
        if f.ta is not None and not f.ta.is_multicast:
            transmitters.add(f.ta)
        if rec.addr2 is None:
            continue
        if rec.kind in (FrameKind.DATA, FrameKind.CF_POLL):
            if rec.to_ds and not rec.from_ds:
                link(rec.addr2, rec.addr1)
            elif rec.from_ds and not rec.to_ds:
                link(rec.addr1, rec.addr2)
        elif rec.kind is not FrameKind.BEACON:
            if rec.addr1 in aps:
                link(rec.addr2, rec.addr1)
            elif rec.addr2 in aps:
                link(rec.addr1, rec.addr2)

    stations = {mac: StationIdentity(mac, ap) for mac, ap in bssid_of.items()}
    unassociated = transmitters - aps - set(stations)
    return Discovery(stations, aps, unassociated)


# -- accounting --------------------------------------------------------------------

_ONLINE, _TX, _RX, _OV, _WASTE, _SLEEP = range(6)
_BASE_NAME = {_TX: "tx_us", _RX: "rx_us", _OV: "ov_us", _ONLINE: "idle_us"}


def account_station(
    ident: StationIdentity,
    frames: Sequence[Frame],
    profile: HardwareProfile,
    phy: PhyParams = PHY_11A,
    threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S,
    span_end: int | None = None,
    decisions: list | None = None,
) -> ActivityLedger:
    """Both variants of one station's ledger over one trace file.

    ``decisions`` collects ``(frame, decision)`` for every frame the
    station considered, when given.
    """
    mac = ident.mac
    if span_end is None:
        span_end = max((f.end for f in frames), default=0)
    ctx = StationContext(mac, ident.bssid, profile, phy)
    events: list[tuple[int, int, int]] = []
    ledger = ActivityLedger(mac, ident.bssid)
    tx_times = [f.start for f in frames if f.ta == mac]
    windows = OnlineTracker(threshold_us).windows(tx_times, span_end)
    starts = [a for a, _ in windows]

    for f in frames:
        k = bisect_right(starts, f.start) - 1
        if k < 0 or f.start >= windows[k][1]:
            if f.rec.kind is FrameKind.BEACON:
                track_contention(ctx, f.rec)
            continue
        if f.ta == mac:
            chan = _TX
        elif f.rec.addr1 == mac:
            chan = _RX
        else:
            chan = _OV
        events.append((f.start, chan, 1))
        events.append((f.end, chan, -1))

        if f.ta == mac:
            # own ACK/CTS carry no addr2; the inferred transmitter settles it
            decision = Stay(StayReason.OWN_TRANSMISSION)
        else:
            decision = on_frame(ctx, f.rec)
        if decisions is not None:
            decisions.append((f, decision))
        if isinstance(decision, Doze):
            ledger.dozes += 1
            for a, b, state in doze_phases(decision, profile):
                c = _WASTE if state == "waste" else _SLEEP
                events.append((a, c, 1))
                events.append((b, c, -1))
        elif decision.reason is StayReason.ALREADY_ASLEEP and f.rec.addr1 == mac:
            ledger.missed_frames += 1

    for a, b in windows:
        events.append((a, _ONLINE, 1))
        events.append((b, _ONLINE, -1))

    _sweep(events, ledger)
    ledger.seen = (tx_times[-1] if tx_times else 0, frames[0].rec.source_id if frames else "")
    return ledger


def _sweep(events: list[tuple[int, int, int]], ledger: ActivityLedger) -> None:
    events.sort()
    count = [0] * 6
    base = Counter()
    unap = Counter()
    prev = None
    for t, chan, delta in events:
        if prev is not None and t > prev:
            span = t - prev
            if count[_TX]:
                state = _TX
            elif count[_RX]:
                state = _RX
            elif count[_OV]:
                state = _OV
            elif count[_ONLINE]:
                state = _ONLINE
            else:
                state = None
            if state is not None:
                name = _BASE_NAME[state]
                base[name] += span
                if state in (_OV, _ONLINE) and count[_WASTE]:
                    unap["waste_us"] += span
                elif state in (_OV, _ONLINE) and count[_SLEEP]:
                    unap["sleep_us"] += span
                else:
                    unap[name] += span
        count[chan] += delta
        prev = t
    ledger.baseline = StateTimes(**{k: base[k] for k in STATES})
    ledger.unap = StateTimes(**{k: unap[k] for k in STATES})


def account_file(
    frames: Sequence[Frame],
    profile: HardwareProfile,
    phy: PhyParams = PHY_11A,
    threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S,
    stations: Iterable[StationIdentity] | None = None,
    decision_log: list[tuple[int, str, str, str]] | None = None,
) -> dict[MacAddress, ActivityLedger]:
    """Ledgers for every associated (non-AP) station of one trace file."""
    if stations is None:
        stations = discover(frames).stations.values()
    span_end = max((f.end for f in frames), default=0)
    out = {}
    for ident in sorted(stations, key=lambda s: s.mac):
        if ident.is_ap:
            continue
        decisions = [] if decision_log is not None else None
        ledger = account_station(ident, frames, profile, phy, threshold_us, span_end, decisions)
        if decisions:
            sta = str(ident.mac)
            decision_log.extend((f.start, sta, *describe(d)) for f, d in decisions)
        if ledger.baseline.total_us:
            out[ident.mac] = ledger
    if decision_log is not None:
        decision_log.sort()
    return out


def account(
    frames: Sequence[Frame],
    stations: Iterable[StationIdentity] | None,
    profile: HardwareProfile,
    variant: str,
    phy: PhyParams = PHY_11A,
    threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S,
) -> dict[MacAddress, StateTimes]:
    """Per-station state times for one variant ('baseline' or 'unap')."""
    ledgers = account_file(frames, profile, phy, threshold_us, stations)
    return {mac: ledger.variant(variant) for mac, ledger in ledgers.items()}


def merge_ledgers(parts: Iterable[dict[MacAddress, ActivityLedger]]) -> dict[MacAddress, ActivityLedger]:
    merged: dict[MacAddress, ActivityLedger] = {}
    for part in parts:
        for mac, ledger in part.items():
            merged[mac] = merged[mac].merge(ledger) if mac in merged else ledger
    return dict(sorted(merged.items()))


# -- whole-run driver ------------------------------------------------------------

@dataclass
class FileResult:
    path: str
    ledgers: dict[MacAddress, ActivityLedger]
    stats: Counter
    decision_log: list[tuple[int, str, str, str]] | None = None
    error: str | None = None


def analyze_file(
    path: str,
    fmt: str,
    profile: HardwareProfile,
    phy: PhyParams = PHY_11A,
    threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S,
    want_log: bool = False,
) -> FileResult:
    stats: Counter = Counter()
    try:
        records = read_trace(path, fmt, stats)
        frames = prepare(records, phy, stats)
    except TraceError as exc:
        return FileResult(path, {}, stats, error=str(exc))
    if stats["missing_rate"]:
        log.warning("%s: %d frames without rate, assumed 6 Mbps", path, stats["missing_rate"])
    dlog = [] if want_log else None
    ledgers = account_file(frames, profile, phy, threshold_us, decision_log=dlog)
    stats["stations"] += len(ledgers)
    return FileResult(path, ledgers, stats, dlog)


def analyze_files(
    paths: Sequence[str | Path],
    fmt: str,
    profile: HardwareProfile,
    phy: PhyParams = PHY_11A,
    threshold_us: int = DEFAULT_ONLINE_THRESHOLD_S * US_PER_S,
    workers: int = 1,
    want_log: bool = False,
) -> list[FileResult]:
    """Analyze each file independently, in parallel when ``workers > 1``.

    Results come back in input order, so merging them is deterministic.
    """
    args = [(str(p), fmt, profile, phy, threshold_us, want_log) for p in paths]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
            return list(pool.map(analyze_file, *zip(*args)))
    return [analyze_file(*a) for a in args]


# -- selection and energy ----------------------------------------------------------

def upper_decile(ledgers: dict[MacAddress, ActivityLedger] | Iterable[ActivityLedger], variant: str = "unap") -> list[ActivityLedger]:
    """Stations whose activity reaches the 90th percentile (ties kept)."""
    items = list(ledgers.values()) if isinstance(ledgers, dict) else list(ledgers)
    if not items:
        return []
    activity = np.array([l.variant(variant).activity_us for l in items], dtype=float)
    cut = np.percentile(activity, 90)
    return [l for l, a in zip(items, activity) if a >= cut]


def state_energy_uj(times: StateTimes, profile: HardwareProfile) -> dict[str, float]:
    """Energy per state in uJ; waste is billed at idle power."""
    return {
        "tx_us": profile.p_tx_w * times.tx_us,
        "rx_us": profile.p_rx_w * times.rx_us,
        "ov_us": profile.p_ov_w * times.ov_us,
        "sleep_us": profile.p_sleep_w * times.sleep_us,
        "waste_us": profile.p_idle_w * times.waste_us,
        "idle_us": profile.p_idle_w * times.idle_us,
    }


def activity_energy_mwh(times: StateTimes, profile: HardwareProfile) -> float:
    """Energy over activity time (everything but idle), in mWh."""
    parts = state_energy_uj(times, profile)
    del parts["idle_us"]
    return sum(parts.values()) / UJ_PER_MWH


def mwh_to_mah(mwh: float, battery_v: float = BATTERY_V) -> float:
    return mwh / battery_v


@dataclass
class EnergyReport:
    rows: list[dict]
    summary: dict


def energy_report(
    ledgers: Iterable[ActivityLedger],
    profile: HardwareProfile,
    battery_v: float = BATTERY_V,
) -> EnergyReport:
    """Per-station consumption of both variants plus the aggregate savings."""
    rows = []
    totals = {v: 0.0 for v in VARIANTS}
    ov_baseline_mwh = 0.0
    time_totals = {v: StateTimes() for v in VARIANTS}
    ov_fraction = {v: [] for v in VARIANTS}
    ledgers = list(ledgers)
    for ledger in ledgers:
        for v in VARIANTS:
            times = ledger.variant(v)
            mwh = activity_energy_mwh(times, profile)
            totals[v] += mwh
            time_totals[v] = time_totals[v] + times
            if times.activity_us:
                ov_fraction[v].append(times.ov_us / times.activity_us)
            rows.append({"mac": str(ledger.mac), "variant": v, **times.as_dict(),
                         "activity_us": times.activity_us, "energy_mwh": mwh,
                         "energy_mah": mwh_to_mah(mwh, battery_v)})
        ov_baseline_mwh += profile.p_ov_w * ledger.baseline.ov_us / UJ_PER_MWH

    saved = totals["baseline"] - totals["unap"]
    ov_b = time_totals["baseline"].ov_us
    summary = {
        "stations": len(ledgers),
        "baseline_mah": mwh_to_mah(totals["baseline"], battery_v),
        "unap_mah": mwh_to_mah(totals["unap"], battery_v),
        "saved_mah": mwh_to_mah(saved, battery_v),
        "saved_mwh": saved,
        "energy_saving_pct_of_activity": _pct(saved, totals["baseline"]),
        "energy_saving_pct_of_overhearing": _pct(saved, ov_baseline_mwh),
        "overhearing_reduction_pct": _pct(ov_b - time_totals["unap"].ov_us, ov_b),
        "median_ov_fraction_baseline": _median(ov_fraction["baseline"]),
        "median_ov_fraction_unap": _median(ov_fraction["unap"]),
        "battery_v": battery_v,
    }
    return EnergyReport(rows, summary)


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole else 0.0


def _median(values: list[float]) -> float:
    return float(np.median(values)) if values else 0.0
