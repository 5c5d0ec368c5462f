"""Per-station micro-sleep decisions for overheard frames.

A station listens to the first 16 header bytes of each frame it can see
(10 for ACK/CTS), then either stays awake or dozes for the rest of the
frame plus, when usable, the NAV it announces, plus one SIFS.

The NAV is usable only if the duration/ID field holds a duration, the
BSS is in a contention period and the frame is not a CTS. Dozes are only
taken on unicast frames for other stations of the station's own BSS.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Union

from .frames import (
    CFP_DURATION,
    PHY_11A,
    DurationId,
    FrameKind,
    FrameRecord,
    MacAddress,
    PhyParams,
    decision_header_bytes,
    frame_airtime_us,
    header_decision_time_us,
)
from .hardware import HardwareProfile

# Slack allowed around SIFS when matching an ACK/CTS to the frame it answers.
RESPONSE_SLACK_US = 4


class StayReason(enum.Enum):
    ADDRESSED_TO_ME = "addressed_to_me"
    MULTICAST = "multicast"
    FOREIGN_BSS = "foreign_bss"
    NO_ADDR2 = "no_addr2"
    TOO_SHORT = "too_short"
    ALREADY_ASLEEP = "already_asleep"
    OWN_TRANSMISSION = "own_tx"


class NavIgnored(enum.Enum):
    """Why a frame's duration/ID did not extend the doze."""

    NOT_A_DURATION = "not_duration"
    CTS_FRAME = "cts"
    CFP = "cfp"


@dataclass(frozen=True)
class Doze:
    start_us: int
    dt_sleep_us: int
    waste_us: int
    nav_extended: bool
    nav_ignored: NavIgnored | None = None

    @property
    def end_us(self) -> int:
        return self.start_us + self.dt_sleep_us


@dataclass(frozen=True)
class Stay:
    reason: StayReason
    nav_ignored: NavIgnored | None = None


SleepDecision = Union[Doze, Stay]


@dataclass
class StationContext:
    own_addr: MacAddress
    bssid: MacAddress
    profile: HardwareProfile
    phy: PhyParams = PHY_11A
    contention_allowed: bool = True
    awake_until_us: int = 0
    # (transmitter, end_us) of the last same-BSS frame heard, used to
    # attribute a following ACK/CTS that carries no transmitter address
    last_exchange: tuple[MacAddress, int] | None = None


def same_bss(frame: FrameRecord, bssid: MacAddress) -> bool:
    """Whether a frame with a transmitter address belongs to ``bssid``.

    Data frames are judged by their DS bits; IBSS (no DS bit) and WDS
    (both) data frames never match. Management and control frames match
    when either address is the BSSID.
    """
    if frame.kind in (FrameKind.DATA, FrameKind.CF_POLL):
        if frame.to_ds and not frame.from_ds:
            return frame.addr1 == bssid
        if frame.from_ds and not frame.to_ds:
            return frame.addr2 == bssid
        return False
    return frame.addr1 == bssid or frame.addr2 == bssid


def track_contention(ctx: StationContext, frame: FrameRecord) -> None:
    """Update the CP/CFP flag from a beacon of the station's own BSS."""
    if frame.kind is FrameKind.BEACON and frame.addr2 == ctx.bssid:
        ctx.contention_allowed = frame.duration_id.raw != CFP_DURATION


def on_frame(ctx: StationContext, frame: FrameRecord) -> SleepDecision:
    track_contention(ctx, frame)
    if frame.timestamp_us < ctx.awake_until_us:
        return Stay(StayReason.ALREADY_ASLEEP)
    if frame.addr2 is not None and frame.addr2 == ctx.own_addr:
        return Stay(StayReason.OWN_TRANSMISSION)
    if frame.addr1.is_multicast:
        return Stay(StayReason.MULTICAST)
    if frame.addr1 == ctx.own_addr:
        return Stay(StayReason.ADDRESSED_TO_ME)

    end = frame.timestamp_us + frame_airtime_us(frame.psdu_len, frame.rate_mbps, ctx.phy)
    if frame.addr2 is None:
        if not _answers_last_exchange(ctx, frame):
            return Stay(StayReason.NO_ADDR2)
    else:
        if not same_bss(frame, ctx.bssid):
            return Stay(StayReason.FOREIGN_BSS)
        ctx.last_exchange = (frame.addr2, end)

    header = decision_header_bytes(frame)
    now = frame.timestamp_us + header_decision_time_us(header, frame.rate_mbps, ctx.phy)
    return set_sleep(ctx, end - now, frame.duration_id, frame.kind, now)


def _answers_last_exchange(ctx: StationContext, frame: FrameRecord) -> bool:
    if ctx.last_exchange is None:
        return False
    peer, peer_end = ctx.last_exchange
    gap = frame.timestamp_us - peer_end
    return frame.addr1 == peer and abs(gap - ctx.phy.sifs_us) <= RESPONSE_SLACK_US


def set_sleep(
    ctx: StationContext,
    dt_data_us: int,
    nav: DurationId,
    kind: FrameKind,
    now_us: int,
) -> SleepDecision:
    if dt_data_us < 0:
        raise ValueError("dt_data_us must be >= 0")
    if not nav.is_nav:
        ignored = NavIgnored.NOT_A_DURATION
    elif kind is FrameKind.CTS:
        ignored = NavIgnored.CTS_FRAME
    elif not ctx.contention_allowed:
        ignored = NavIgnored.CFP
    else:
        ignored = None
    nav_us = nav.raw if ignored is None else 0
    dt_sleep = dt_data_us + nav_us + ctx.phy.sifs_us
    if dt_sleep < ctx.profile.t_sleep_min_us:
        return Stay(StayReason.TOO_SHORT, ignored)
    ctx.awake_until_us = max(ctx.awake_until_us, now_us + dt_sleep)
    return Doze(
        start_us=now_us,
        dt_sleep_us=dt_sleep,
        waste_us=ctx.profile.t_waste_us,
        nav_extended=nav_us > 0,
        nav_ignored=ignored,
    )


def accounting_split(decision: Doze, profile: HardwareProfile) -> tuple[int, int]:
    """(sleep_us, waste_us) of one doze."""
    return decision.dt_sleep_us - profile.t_waste_us, profile.t_waste_us


def doze_phases(decision: Doze, profile: HardwareProfile) -> list[tuple[int, int, str]]:
    """Split a doze into ``(start, end, state)`` pieces, state 'waste' or 'sleep'.

    Falling edge at idle power first, then sleep (covering the wake-up
    ramp), then the ready period back at idle power.
    """
    s, e = decision.start_us, decision.end_us
    pieces = [
        (s, s + profile.t_off_us, "waste"),
        (s + profile.t_off_us, e - profile.t_ready_us, "sleep"),
        (e - profile.t_ready_us, e, "waste"),
    ]
    return [p for p in pieces if p[1] > p[0]]


def replay(ctx: StationContext, frames: Iterable[FrameRecord]) -> list[SleepDecision]:
    return [on_frame(ctx, f) for f in frames]


def describe(decision: SleepDecision) -> tuple[str, str]:
    """Short (decision, detail) strings for the decision log."""
    if isinstance(decision, Doze):
        detail = str(decision.dt_sleep_us)
        if decision.nav_extended:
            detail += "+nav"
        return "doze", detail
    detail = decision.reason.value
    if decision.nav_ignored is not None:
        detail += f"/{decision.nav_ignored.value}"
    return "stay", detail
