"""Randomized infrastructure-mode 802.11a traces with known ground truth.

Exchanges follow DCF timing (DIFS + backoff between exchanges, SIFS inside
them) and carry honest NAVs, so a correct micro-sleep engine never dozes
across the start of a frame addressed to it. Contention-free periods
deliberately carry misleading NAVs: there the only safe behaviour is to
ignore them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .analysis import default_ack_rate
from .frames import (
    CFP_DURATION,
    FC_FROM_DS,
    FC_MORE_FRAG,
    FC_RETRY,
    FC_TO_DS,
    PHY_11A,
    BROADCAST,
    DurationId,
    FrameRecord,
    MacAddress,
    PhyParams,
    frame_airtime_us,
)

PIFS_US = 25
BEACON_INTERVAL_US = 102_400
ACK_LEN = 14
CTS_LEN = 14
RTS_LEN = 20
BEACON_LEN = 120
MULTICAST = MacAddress.parse("01:00:5e:00:00:fb")

EXCHANGES = {
    "data": 30,
    "rts": 10,
    "frag": 6,
    "cts_self": 5,
    "multicast": 4,
    "mgmt": 3,
    "foreign": 10,
    "ibss": 2,
    "cfp": 3,
    "probe": 2,
    "long_gap": 1,
}


def mac(prefix: int, n: int) -> MacAddress:
    return MacAddress(bytes([0x02, 0, 0, 0, prefix, n]))


@dataclass
class SyntheticTrace:
    frames: list[FrameRecord]
    ap: MacAddress
    stations: list[MacAddress]
    foreign_ap: MacAddress
    foreign_stations: list[MacAddress]
    exchanges: dict[str, int] = field(default_factory=dict)


class _Builder:
    def __init__(self, rng: random.Random, phy: PhyParams, source_id: str, bad_fcs_rate: float):
        self.rng = rng
        self.phy = phy
        self.source_id = source_id
        self.bad_fcs_rate = bad_fcs_rate
        self.frames: list[tuple[int, int, FrameRecord]] = []
        self.seq = 0

    def emit(self, ts, rate, psdu, ftype, subtype, flags, nav, a1, a2=None) -> int:
        """Append one frame and return its end time."""
        fcs_ok = self.rng.random() >= self.bad_fcs_rate
        rec = FrameRecord(
            timestamp_us=ts,
            rate_mbps=rate,
            psdu_len=psdu,
            ftype=ftype,
            subtype=subtype,
            flags=flags,
            duration_id=DurationId(nav),
            addr1=a1,
            addr2=a2,
            fcs_ok=fcs_ok,
            source_id=self.source_id,
        )
        self.frames.append((ts, self.seq, rec))
        self.seq += 1
        return ts + frame_airtime_us(psdu, rate, self.phy)

    def air(self, psdu, rate):
        return frame_airtime_us(psdu, rate, self.phy)


def generate(
    seed: int,
    n_frames: int = 2000,
    n_stations: int = 4,
    n_foreign: int = 2,
    phy: PhyParams = PHY_11A,
    weights: dict[str, int] | None = None,
    bad_fcs_rate: float = 0.01,
    long_gap_us: int = 400_000,
    source_id: str = "",
) -> SyntheticTrace:
    rng = random.Random(seed)
    weights = dict(EXCHANGES if weights is None else weights)
    b = _Builder(rng, phy, source_id or f"synthetic-{seed}", bad_fcs_rate)
    sifs = phy.sifs_us
    rates = phy.rates

    ap = mac(0, 1)
    stas = [mac(1, i + 1) for i in range(n_stations)]
    fap = mac(0, 2)
    fstas = [mac(2, i + 1) for i in range(n_foreign)]
    loner = mac(3, 1)
    counts: dict[str, int] = {}

    def rate():
        return rng.choice(rates)

    def psdu():
        return rng.choice([rng.randint(28, 120), rng.randint(120, 700), rng.randint(700, 1540), 1540])

    def data_ack(t, src, dst, flags):
        r = rate()
        ar = default_ack_rate(r)
        end = b.emit(t, r, psdu(), 2, 0, flags, sifs + b.air(ACK_LEN, ar), dst, src)
        return b.emit(end + sifs, ar, ACK_LEN, 1, 13, 0, 0, src)

    def up_or_down(pool, ap_addr):
        sta = rng.choice(pool)
        if rng.random() < 0.5:
            return sta, ap_addr, FC_TO_DS
        return ap_addr, sta, FC_FROM_DS

    # association of every station so discovery has evidence early
    t = 1000
    for sta in stas:
        for src, dst, sub in ((sta, ap, 0), (ap, sta, 1)):
            ar = 6
            end = b.emit(t, 6, 60, 0, sub, 0, sifs + b.air(ACK_LEN, ar), dst, src)
            t = b.emit(end + sifs, ar, ACK_LEN, 1, 13, 0, 0, src) + phy.difs_us
    next_beacon = t
    foreign_free = 0

    kinds = list(weights)
    kw = [weights[k] for k in kinds]
    while len(b.frames) < n_frames:
        t += phy.difs_us + rng.randint(0, 15) * phy.slot_us
        if t >= next_beacon:
            t = b.emit(t, 6, BEACON_LEN, 0, 8, 0, 0, BROADCAST, ap) + phy.difs_us
            next_beacon += BEACON_INTERVAL_US
            counts["beacon"] = counts.get("beacon", 0) + 1
            continue
        kind = rng.choices(kinds, kw)[0]
        counts[kind] = counts.get(kind, 0) + 1

        if kind == "data":
            src, dst, flags = up_or_down(stas, ap)
            if rng.random() < 0.1:
                flags |= FC_RETRY
            t = data_ack(t, src, dst, flags)

        elif kind == "rts":
            src, dst, flags = up_or_down(stas, ap)
            r = rate()
            ar = default_ack_rate(r)
            length = psdu()
            cts, ack, data = b.air(CTS_LEN, ar), b.air(ACK_LEN, ar), b.air(length, r)
            rts_nav = 3 * sifs + cts + data + ack
            end = b.emit(t, ar, RTS_LEN, 1, 11, 0, rts_nav, dst, src)
            end = b.emit(end + sifs, ar, CTS_LEN, 1, 12, 0, rts_nav - sifs - cts, src)
            end = b.emit(end + sifs, r, length, 2, 0, flags, sifs + ack, dst, src)
            t = b.emit(end + sifs, ar, ACK_LEN, 1, 13, 0, 0, src)

        elif kind == "frag":
            src, dst, flags = up_or_down(stas, ap)
            r = rate()
            ar = default_ack_rate(r)
            ack = b.air(ACK_LEN, ar)
            sizes = [rng.randint(200, 800) for _ in range(rng.randint(2, 4))]
            airs = [b.air(s, r) for s in sizes]
            if rng.random() < 0.5:
                cts = b.air(CTS_LEN, ar)
                rts_nav = 3 * sifs + cts + airs[0] + ack
                end = b.emit(t, ar, RTS_LEN, 1, 11, 0, rts_nav, dst, src)
                t = b.emit(end + sifs, ar, CTS_LEN, 1, 12, 0, rts_nav - sifs - cts, src) + sifs
            for i, (size, air) in enumerate(zip(sizes, airs)):
                last = i == len(sizes) - 1
                nav = sifs + ack if last else 3 * sifs + 2 * ack + airs[i + 1]
                end = b.emit(t, r, size, 2, 0, flags | (0 if last else FC_MORE_FRAG), nav, dst, src)
                ack_nav = 0 if last else nav - sifs - ack
                t = b.emit(end + sifs, ar, ACK_LEN, 1, 13, 0, ack_nav, src) + sifs
            t -= sifs

        elif kind == "cts_self":
            src, dst, flags = up_or_down(stas, ap)
            r = rate()
            ar = default_ack_rate(r)
            length = psdu()
            ack, data = b.air(ACK_LEN, ar), b.air(length, r)
            end = b.emit(t, ar, CTS_LEN, 1, 12, 0, 2 * sifs + data + ack, src)
            end = b.emit(end + sifs, r, length, 2, 0, flags, sifs + ack, dst, src)
            t = b.emit(end + sifs, ar, ACK_LEN, 1, 13, 0, 0, src)

        elif kind == "multicast":
            target = rng.choice([MULTICAST, BROADCAST])
            t = b.emit(t, rate(), psdu(), 2, 0, FC_FROM_DS, 0, target, ap)

        elif kind == "mgmt":
            sta = rng.choice(stas)
            src, dst = (sta, ap) if rng.random() < 0.5 else (ap, sta)
            end = b.emit(t, 6, rng.randint(40, 300), 0, rng.choice([0, 1, 10, 13]), 0, sifs + b.air(ACK_LEN, 6), dst, src)
            t = b.emit(end + sifs, 6, ACK_LEN, 1, 13, 0, 0, src)

        elif kind == "probe":
            t = b.emit(t, 6, 60, 0, 4, 0, 0, BROADCAST, loner)

        elif kind == "foreign":
            # foreign exchanges never overlap each other, so their NAVs stay
            # honest for the foreign stations; they may overlap our own BSS
            src, dst, flags = up_or_down(fstas, fap)
            if rng.random() < 0.4:
                start = max(rng.randint(max(0, t - 3000), t), foreign_free)
                foreign_free = data_ack(start, src, dst, flags) + phy.difs_us
            else:
                t = max(t, foreign_free)
                t = data_ack(t, src, dst, flags)
                foreign_free = t + phy.difs_us

        elif kind == "ibss":
            s1, s2 = rng.sample(stas, 2) if len(stas) > 1 else (stas[0], fstas[0])
            t = data_ack(t, s1, s2, 0)

        elif kind == "cfp":
            t = _cfp(b, rng, t, ap, stas, phy)
            counts["beacon"] = counts.get("beacon", 0) + 2

        elif kind == "long_gap":
            t += long_gap_us + rng.randint(0, long_gap_us)

    frames = [rec for _, _, rec in sorted(b.frames, key=lambda x: (x[0], x[1]))]
    return SyntheticTrace(frames, ap, stas, fap, fstas, counts)


def _cfp(b: _Builder, rng: random.Random, t: int, ap, stas, phy: PhyParams) -> int:
    """Beacon-delimited CFP of polls and replies with misleading NAVs."""
    sifs = phy.sifs_us
    t = b.emit(t, 6, BEACON_LEN, 0, 8, 0, CFP_DURATION, BROADCAST, ap) + PIFS_US
    for _ in range(rng.randint(2, 6)):
        sta = rng.choice(stas)
        r = rng.choice(phy.rates)
        fake = rng.choice([CFP_DURATION, rng.randint(500, 20000)])
        end = b.emit(t, r, rng.randint(28, 1500), 2, 2, FC_FROM_DS, fake, sta, ap)
        if rng.random() < 0.7:
            fake = rng.choice([CFP_DURATION, rng.randint(500, 20000)])
            end = b.emit(end + sifs, r, rng.randint(28, 1500), 2, 1, FC_TO_DS, fake, ap, sta)
        t = end + rng.choice([sifs, PIFS_US])
    return b.emit(t, 6, BEACON_LEN, 0, 8, 0, 0, BROADCAST, ap)
