"""Independent reference implementations used only by the tests.

Nothing here imports the production accounting, engine or loss code. The
timeline simulator paints one numpy cell per microsecond and reads states
off the painted arrays, so it shares no event logic with the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIFS = 16
PLCP = 20
SYMBOL = 4
DBPS = {6: 24, 9: 36, 12: 48, 18: 72, 24: 96, 36: 144, 48: 192, 54: 216}
CFP_RAW = 32768
SLACK = 4


def symbols_by_counting(bits: int, dbps: int) -> int:
    n, carried = 0, 0
    while carried < bits:
        carried += dbps
        n += 1
    return n


def airtime(psdu_len: int, rate) -> int:
    return PLCP + SYMBOL * symbols_by_counting(16 + 8 * psdu_len + 6, DBPS[rate])


def decision_offset(rec) -> int:
    header = 16 if rec.addr2 is not None and rec.psdu_len >= 16 else 10
    return PLCP + SYMBOL * symbols_by_counting(16 + 8 * header, DBPS[rec.rate_mbps])


def is_group(addr) -> bool:
    return bool(addr.octets[0] & 1)


@dataclass
class OFrame:
    start: int
    end: int
    ta: object
    rec: object


def timed_frames(records) -> list[OFrame]:
    out: list[OFrame] = []
    for i, rec in enumerate(records):
        start = rec.timestamp_us
        ta = rec.addr2
        if ta is None:
            found = False
            for j in range(i - 1, max(-1, i - 9), -1):
                prev = out[j]
                if (prev.rec.addr2 == rec.addr1 and not is_group(prev.rec.addr1)
                        and abs(start - prev.end - SIFS) <= SLACK):
                    ta, found = prev.rec.addr1, True
                    break
            if not found and rec.ftype == 1 and rec.subtype == 12:
                ta = rec.addr1
        out.append(OFrame(start, start + airtime(rec.psdu_len, rec.rate_mbps), ta, rec))
    return out


def _same_bss(rec, bssid) -> bool:
    to_ds, from_ds = bool(rec.flags & 1), bool(rec.flags & 2)
    if rec.ftype == 2:
        if to_ds and not from_ds:
            return rec.addr1 == bssid
        if from_ds and not to_ds:
            return rec.addr2 == bssid
        return False
    return rec.addr1 == bssid or rec.addr2 == bssid


def _is_beacon(rec) -> bool:
    return rec.ftype == 0 and rec.subtype == 8


def _is_cts(rec) -> bool:
    return rec.ftype == 1 and rec.subtype == 12


@dataclass
class OracleResult:
    baseline: dict
    unap: dict
    dozes: list  # (start, end, nav_used)
    violations: list  # starts of own-addressed same-BSS frames inside a doze


def simulate_station(frames: list[OFrame], mac, bssid, t_sleep_min, t_off, t_ready, threshold) -> OracleResult:
    span = max((f.end for f in frames), default=0)
    online = np.zeros(span + 1, dtype=bool)
    tx = np.zeros(span + 1, dtype=bool)
    rx = np.zeros_like(tx)
    ov = np.zeros_like(tx)
    waste = np.zeros_like(tx)
    sleep = np.zeros_like(tx)
    blind = np.zeros_like(tx)

    for f in frames:
        if f.ta == mac:
            online[f.start : min(f.start + threshold, span)] = True

    cp = True
    asleep_until = 0
    last = None  # (transmitter, end)
    dozes = []
    for f in frames:
        rec = f.rec
        if _is_beacon(rec) and rec.addr2 == bssid:
            cp = rec.duration_id.raw != CFP_RAW
        if not online[f.start]:
            continue
        if f.ta == mac:
            tx[f.start : f.end] = True
            continue
        if rec.addr1 == mac:
            rx[f.start : f.end] = True
        else:
            ov[f.start : f.end] = True
        if f.start < asleep_until:
            continue
        if rec.addr1 == mac or is_group(rec.addr1):
            continue
        if rec.addr2 is None:
            if last is None or rec.addr1 != last[0] or abs(f.start - last[1] - SIFS) > SLACK:
                continue
        else:
            if not _same_bss(rec, bssid):
                continue
            last = (rec.addr2, f.end)
        now = f.start + decision_offset(rec)
        raw = rec.duration_id.raw
        nav = raw if raw < CFP_RAW and not _is_cts(rec) and cp else 0
        dt = f.end - now + nav + SIFS
        if dt < t_sleep_min:
            continue
        s, e = now, now + dt
        asleep_until = e
        dozes.append((s, e, nav > 0))
        blind[s : min(e, span)] = True
        waste[s : min(s + t_off, span)] = True
        waste[max(s, e - t_ready) : min(e, span)] = True
        lo, hi = s + t_off, min(e - t_ready, span)
        if hi > lo:
            sleep[lo:hi] = True

    b_tx = tx
    b_rx = rx & ~tx
    b_ov = ov & ~tx & ~rx
    b_idle = online & ~tx & ~rx & ~ov
    low = b_ov | b_idle
    doze = waste | sleep
    count = np.count_nonzero
    baseline = {"tx_us": count(b_tx), "rx_us": count(b_rx), "ov_us": count(b_ov),
                "sleep_us": 0, "waste_us": 0, "idle_us": count(b_idle)}
    unap = {"tx_us": count(b_tx), "rx_us": count(b_rx), "ov_us": count(b_ov & ~doze),
            "sleep_us": count(low & sleep & ~waste), "waste_us": count(low & waste),
            "idle_us": count(b_idle & ~doze)}

    violations = [
        f.start for f in frames
        if f.rec.addr1 == mac and f.ta != mac and f.start < span and blind[f.start]
        and (f.rec.addr2 is None or _same_bss(f.rec, bssid))
    ]
    return OracleResult({k: int(v) for k, v in baseline.items()}, {k: int(v) for k, v in unap.items()}, dozes, violations)


# -- error models ----------------------------------------------------------------

def neyman_direct(n_bits: int, k: int, ber: float, lam: float, j_max: int = 200):
    """P(k errors in n bits), Neyman-A by direct summation over burst counts (mpmath)."""
    import mpmath as mp

    mp.mp.dps = 50
    ber, lam = mp.mpf(ber), mp.mpf(lam)
    mu = n_bits * ber / lam  # mean number of bursts
    total = mp.mpf(0)
    for j in range(j_max + 1):
        pj = mp.exp(-mu) * mu**j / mp.factorial(j)
        inner = mp.exp(-j * lam) * (j * lam) ** k / mp.factorial(k) if j else (1 if k == 0 else 0)
        total += pj * inner
    return total


def neyman_monte_carlo(n_bits: int, ber: float, lam: float, trials: int, seed: int = 12345):
    """Fraction of trials with 1..n_bits errors, and its standard error."""
    rng = np.random.default_rng(seed)
    mu = n_bits * ber / lam
    bursts = rng.poisson(mu, size=trials)
    # sum of j Poisson(lam) variables is Poisson(j * lam)
    errors = rng.poisson(bursts * lam)
    hits = int(np.count_nonzero((errors >= 1) & (errors <= n_bits)))
    p = hits / trials
    return p, np.sqrt(p * (1 - p) / trials)
