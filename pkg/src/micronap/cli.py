"""Command-line front door: ``micronap <subcommand> ...``.

Exit status: 0 success, 1 configuration error, 2 rejected input file,
3 internal invariant violation. ``MICRONAP_LOG`` sets the log level
(DEBUG, INFO, WARNING, ...; default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .accounting import (
    BATTERY_V,
    DEFAULT_ONLINE_THRESHOLD_S,
    US_PER_S,
    ActivityLedger,
    analyze_files,
    energy_report,
    merge_ledgers,
    upper_decile,
)
from .analysis import applicability_table, clock_power, efficiency_curve
from .exceptions import ConfigError, InvariantViolation, MicronapError, ProfileError, TraceError
from .hardware import HardwareProfile, default_ar9280, format_profile, load_profile
from .loss import ErrorModelParams, ber_grid, duration_histogram, ploss_neyman, ploss_single_bit
from .report import fmt, json_text, read_ledger, write_csv, write_json, write_ledger
from .traceio import FORMATS, read_pcap, read_trace, write_ndjson

log = logging.getLogger("micronap")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3
DEFAULT_LAMBDAS = (1.0, 3.0, 10.0)


@dataclass
class RunConfig:
    """Fully resolved configuration, echoed next to the outputs."""

    command: str
    inputs: list[str] = field(default_factory=list)
    input_format: str = "pcap"
    profile_path: str | None = None
    profile: dict = field(default_factory=dict)
    output_dir: str = "."
    outputs: dict = field(default_factory=dict)
    online_threshold_s: float = DEFAULT_ONLINE_THRESHOLD_S
    decision_log: str | None = None
    workers: int = 1
    params: dict = field(default_factory=dict)
    version: str = __version__


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _profile(path: str | None) -> HardwareProfile:
    return default_ar9280() if path is None else load_profile(path)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _sweep(text: str) -> list[int]:
    parts = text.split(":")
    try:
        nums = [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad sweep {text!r}; expected start:stop[:step]") from exc
    if len(nums) not in (2, 3) or nums[0] <= 0 or nums[1] < nums[0] or (len(nums) == 3 and nums[2] <= 0):
        raise ConfigError(f"bad sweep {text!r}; expected start:stop[:step] with 0 < start <= stop")
    step = nums[2] if len(nums) == 3 else 1
    return list(range(nums[0], nums[1] + 1, step))


def _out(text: str) -> None:
    sys.stdout.write(text)


# -- analyze --------------------------------------------------------------------

def check_invariants(ledgers: dict) -> None:
    for mac, ledger in ledgers.items():
        b, u = ledger.baseline, ledger.unap
        if b.total_us != u.total_us:
            raise InvariantViolation(f"{mac}: variants count different time ({b.total_us} vs {u.total_us})")
        if (b.tx_us, b.rx_us) != (u.tx_us, u.rx_us):
            raise InvariantViolation(f"{mac}: tx/rx differ between variants")
        if u.ov_us > b.ov_us or b.sleep_us or b.waste_us:
            raise InvariantViolation(f"{mac}: micro-sleep variant did not only relabel overhearing/idle")


def cmd_analyze(args) -> int:
    profile = _profile(args.profile)
    if args.format not in FORMATS:
        raise ConfigError(f"unknown format {args.format!r}")
    if args.online_threshold <= 0:
        raise ConfigError("--online-threshold must be positive")
    workers = args.workers or os.cpu_count() or 1
    out = Path(args.out)
    out_dir = out.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = Path(args.summary) if args.summary else out_dir / f"{out.stem}.summary.json"
    config = RunConfig(
        command="analyze",
        inputs=[str(p) for p in args.input],
        input_format=args.format,
        profile_path=args.profile,
        profile=asdict(profile),
        output_dir=str(out_dir),
        outputs={"ledger": str(out), "summary": str(summary_path), "decision_log": args.decision_log},
        online_threshold_s=args.online_threshold,
        decision_log=args.decision_log,
        workers=workers,
        params={"selection": args.selection, "battery_v": args.battery_v},
    )
    write_json(out_dir / f"{out.stem}.config.json", asdict(config))

    threshold_us = int(round(args.online_threshold * US_PER_S))
    results = analyze_files(args.input, args.format, profile, threshold_us=threshold_us,
                            workers=workers, want_log=args.decision_log is not None)
    rejected = [r for r in results if r.error]
    for r in rejected:
        log.error("rejected %s: %s", r.path, r.error)
    stats = Counter()
    for r in results:
        stats.update(r.stats)
    merged = merge_ledgers(r.ledgers for r in results if not r.error)
    check_invariants(merged)

    chosen = upper_decile(merged) if args.selection == "decile" else list(merged.values())
    chosen.sort(key=lambda l: l.mac)
    write_ledger(out, chosen, profile, args.battery_v)
    report = energy_report(chosen, profile, args.battery_v)
    summary = dict(report.summary)
    summary.update({
        "selection": args.selection,
        "stations_total": len(merged),
        "files": len(results),
        "files_rejected": len(rejected),
        "counters": dict(sorted(stats.items())),
    })
    write_json(summary_path, summary)

    if args.decision_log is not None:
        rows = []
        for r in results:
            for t, sta, decision, detail in r.decision_log or ():
                rows.append((Path(r.path).stem, t, sta, decision, detail))
        write_csv(args.decision_log, ("file", "timestamp_us", "station", "decision", "detail"), rows)
    return EXIT_INPUT if rejected else EXIT_OK


# -- other subcommands ------------------------------------------------------------

def cmd_convert(args) -> int:
    status = EXIT_OK
    outdir = Path(args.out_dir) if args.out_dir else None
    if args.output and len(args.input) != 1:
        raise ConfigError("--output needs exactly one input; use --out-dir for several")
    rows = []
    for src in args.input:
        stats = Counter()
        try:
            records = read_pcap(src, stats)
        except TraceError as exc:
            log.error("rejected %s: %s", src, exc)
            status = EXIT_INPUT
            continue
        dest = Path(args.output) if args.output else (outdir or Path(src).parent) / (Path(src).stem + ".ndjson")
        dest.parent.mkdir(parents=True, exist_ok=True)
        write_ndjson(dest, records)
        rows.append((src, str(dest), stats["frames"], stats["truncated"], stats["missing_rate"], stats["missing_flags"]))
    _out(write_csv(None, ("input", "output", "frames", "truncated", "missing_rate", "missing_flags"), rows))
    return status


def cmd_energy(args) -> int:
    profile = _profile(args.profile)
    try:
        ledgers = read_ledger(args.ledger)
    except OSError as exc:
        raise TraceError(f"{args.ledger}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise TraceError(f"{args.ledger}: malformed ledger ({exc})") from exc
    report = energy_report(ledgers, profile, args.battery_v)
    _out(json_text(report.summary))
    return EXIT_OK


def cmd_ploss(args) -> int:
    lambdas = _floats(args.lambdas)
    if not lambdas:
        raise ConfigError("--lambdas needs at least one value")
    bers = ber_grid(args.lo_exp, args.hi_exp, args.per_decade)
    header = ["ber", "ploss_single"] + [f"ploss_neyman_lb{fmt(l)}" for l in lambdas]
    rows = []
    for ber in bers:
        row = [ber, ploss_single_bit(ber)]
        row += [ploss_neyman(ErrorModelParams(ber, lam)) for lam in lambdas]
        rows.append(row)
    text = write_csv(args.out, header, rows)
    if args.out is None:
        _out(text)
    return EXIT_OK


def cmd_efficiency(args) -> int:
    wastes = _floats(args.waste)
    dts = _sweep(args.sweep)
    header = ["dt_sleep_us"] + [f"efficiency_waste{fmt(w)}us" for w in wastes]
    curves = [efficiency_curve(w, dts) for w in wastes]
    rows = [[dt, *(c[i] for c in curves)] for i, dt in enumerate(dts)]
    text = write_csv(args.out, header, rows)
    if args.out is None:
        _out(text)
    return EXIT_OK


def cmd_applicability(args) -> int:
    profile = _profile(args.profile)
    rows = [
        [r.data_rate_mbps, r.ack_rate_mbps, r.l_min, r.applicable_fraction]
        for r in applicability_table(profile, max_payload=args.max_payload)
    ]
    text = write_csv(args.out, ("data_rate_mbps", "ack_rate_mbps", "l_min_bytes", "applicable_fraction"), rows)
    if args.out is None:
        _out(text)
    return EXIT_OK


def cmd_durations(args) -> int:
    records = []
    status = EXIT_OK
    for src in args.input:
        try:
            records.extend(r for r in read_trace(src, args.format) if r.fcs_ok)
        except TraceError as exc:
            log.error("rejected %s: %s", src, exc)
            status = EXIT_INPUT
    rows = [[r.duration, r.percent, r.p_eg_fraction] for r in duration_histogram(records)]
    if args.top:
        rows = rows[: args.top]
    text = write_csv(args.out, ("duration_us", "percent", "p_eg_fraction"), rows)
    if args.out is None:
        _out(text)
    return status


def cmd_clock(args) -> int:
    if args.freq < 0:
        raise ConfigError("--freq must be >= 0")
    _out(fmt(clock_power(args.freq)) + "\n")
    return EXIT_OK


def cmd_profile(args) -> int:
    _out(format_profile(_profile(args.profile)))
    return EXIT_OK


# -- wiring ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="micronap", description="Micro-sleep energy analysis of 802.11a traces.")
    p.add_argument("--version", action="version", version=f"micronap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="per-station ledgers and aggregate savings")
    a.add_argument("--input", nargs="+", required=True)
    a.add_argument("--format", choices=FORMATS, default="pcap")
    a.add_argument("--profile")
    a.add_argument("--out", required=True, help="ledger CSV path")
    a.add_argument("--summary", help="aggregate JSON path (default <out>.summary.json)")
    a.add_argument("--decision-log")
    a.add_argument("--online-threshold", type=float, default=DEFAULT_ONLINE_THRESHOLD_S, help="seconds")
    a.add_argument("--workers", type=int, default=0, help="0 = available cores")
    a.add_argument("--selection", choices=("decile", "all"), default="decile")
    a.add_argument("--battery-v", type=float, default=BATTERY_V)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("convert", help="pcap to normalized ndjson")
    c.add_argument("--input", nargs="+", required=True)
    c.add_argument("--output")
    c.add_argument("--out-dir")
    c.set_defaults(func=cmd_convert)

    e = sub.add_parser("energy", help="energy summary of a ledger CSV")
    e.add_argument("--ledger", required=True)
    e.add_argument("--profile")
    e.add_argument("--battery-v", type=float, default=BATTERY_V)
    e.set_defaults(func=cmd_energy)

    pl = sub.add_parser("ploss", help="frame-loss probability vs BER")
    pl.add_argument("--lambdas", default=",".join(fmt(x) for x in DEFAULT_LAMBDAS))
    pl.add_argument("--lo-exp", type=int, default=-8)
    pl.add_argument("--hi-exp", type=int, default=-2)
    pl.add_argument("--per-decade", type=int, default=10)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_ploss)

    ef = sub.add_parser("efficiency", help="sleep efficiency vs sleep duration")
    ef.add_argument("--waste", default="250,150,50,0", help="comma-separated waste times, us")
    ef.add_argument("--sweep", default="300:5000", help="start:stop[:step], us")
    ef.add_argument("--out")
    ef.set_defaults(func=cmd_efficiency)

    ap = sub.add_parser("applicability", help="minimum payload per data rate")
    ap.add_argument("--profile")
    ap.add_argument("--max-payload", type=int, default=1500)
    ap.add_argument("--out")
    ap.set_defaults(func=cmd_applicability)

    d = sub.add_parser("durations", help="duration/ID histogram of a trace")
    d.add_argument("--input", nargs="+", required=True)
    d.add_argument("--format", choices=FORMATS, default="pcap")
    d.add_argument("--top", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_durations)

    ck = sub.add_parser("clock", help="reference-clock power at a frequency")
    ck.add_argument("--freq", type=float, required=True, help="MHz")
    ck.set_defaults(func=cmd_clock)

    pr = sub.add_parser("profile", help="print a resolved hardware profile")
    pr.add_argument("--profile")
    pr.set_defaults(func=cmd_profile)
    return p


def _setup_logging() -> None:
    level = os.environ.get("MICRONAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, ProfileError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except TraceError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except InvariantViolation as exc:
        log.error("invariant violated: %s", exc)
        return EXIT_INVARIANT
    except MicronapError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
