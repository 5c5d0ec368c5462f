"""CSV/JSON emission with stable formatting.

Floats are written with 6 significant digits and integers verbatim, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .accounting import STATES, ActivityLedger, StateTimes, energy_report
from .exceptions import TraceError
from .frames import MacAddress
from .hardware import HardwareProfile

LEDGER_COLUMNS = ("mac", "variant", *STATES, "activity_us", "energy_mwh", "energy_mah")


def fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def round6(value):
    """Round floats (recursively) to 6 significant digits for JSON output."""
    if isinstance(value, float):
        return value if math.isnan(value) or math.isinf(value) else float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round6(v) for v in value]
    return value


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write to ``path`` (or return the text only when path is None/'-')."""
    text = csv_text(header, rows)
    if path not in (None, "-"):
        Path(path).write_text(text, encoding="utf-8")
    return text


def json_text(obj) -> str:
    return json.dumps(round6(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json_text(obj), encoding="utf-8")


def ledger_rows(ledgers: Iterable[ActivityLedger], profile: HardwareProfile, battery_v: float = 3.7) -> list[list]:
    report = energy_report(ledgers, profile, battery_v)
    return [[row[c] for c in LEDGER_COLUMNS] for row in report.rows]


def write_ledger(path, ledgers: Iterable[ActivityLedger], profile: HardwareProfile, battery_v: float = 3.7) -> str:
    return write_csv(path, LEDGER_COLUMNS, ledger_rows(ledgers, profile, battery_v))


def read_ledger(path: str | Path) -> list[ActivityLedger]:
    """Rebuild ledgers from a ledger CSV. A missing variant copies the other."""
    by_mac: dict[str, dict[str, StateTimes]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("mac", "variant", *STATES) if c not in (reader.fieldnames or [])]
        if missing:
            raise TraceError(f"{path}: ledger lacks columns {missing}")
        for row in reader:
            variant = row["variant"]
            if variant not in ("baseline", "unap"):
                raise TraceError(f"{path}: unknown variant {variant!r}")
            times = StateTimes(**{k: int(row[k]) for k in STATES})
            by_mac.setdefault(row["mac"], {})[variant] = times
    out = []
    for mac, variants in sorted(by_mac.items()):
        base = variants.get("baseline", variants.get("unap"))
        unap = variants.get("unap", base)
        out.append(ActivityLedger(MacAddress.parse(mac), None, base, unap))
    return out
