"""Radio timing/power model and the micro-sleep energy equations.

Energies are in microjoules (W x us). Transients are modelled as
rectangles: the card sits at idle power for ``t_off_us`` after the sleep
trigger and for ``t_ready_us`` after waking, and at sleep power during
``t_on_us``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ProfileError, SleepTooShort

_TIME_KEYS = ("t_off_us", "t_on_us", "t_ready_us")
_POWER_KEYS = ("p_tx_w", "p_rx_w", "p_ov_w", "p_idle_w", "p_sleep_w")


@dataclass(frozen=True)
class HardwareProfile:
    t_off_us: int
    t_on_us: int
    t_ready_us: int
    p_tx_w: float
    p_rx_w: float
    p_ov_w: float
    p_idle_w: float
    p_sleep_w: float
    name: str = "custom"

    def __post_init__(self):
        for key in _TIME_KEYS:
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ProfileError(f"{key} must be a non-negative integer number of us, got {value!r}")
        for key in _POWER_KEYS:
            if getattr(self, key) < 0:
                raise ProfileError(f"{key} must be >= 0")
        if not self.p_sleep_w < self.p_idle_w <= self.p_rx_w:
            raise ProfileError("expected p_sleep_w < p_idle_w <= p_rx_w")

    @property
    def t_sleep_min_us(self) -> int:
        return self.t_off_us + self.t_on_us + self.t_ready_us

    @property
    def t_waste_us(self) -> int:
        return self.t_off_us + self.t_ready_us

    @property
    def wake_lead_us(self) -> int:
        """How long before the end of a doze the wake trigger must fire."""
        return self.t_on_us + self.t_ready_us

    def replace(self, **changes) -> "HardwareProfile":
        return dataclasses.replace(self, **changes)


def default_ar9280() -> HardwareProfile:
    """Atheros AR9280 in 11a mode."""
    return HardwareProfile(
        t_off_us=50,
        t_on_us=50,
        t_ready_us=200,
        p_tx_w=3.10,
        p_rx_w=1.373,
        p_ov_w=1.371,
        p_idle_w=1.292,
        p_sleep_w=0.424,
        name="ar9280",
    )


def ideal_profile(base: HardwareProfile | None = None) -> HardwareProfile:
    """Same powers as ``base`` with instantaneous state switching."""
    base = base or default_ar9280()
    return base.replace(t_off_us=0, t_on_us=0, t_ready_us=0, name=f"{base.name}-ideal")


def energy_saved_ideal(profile: HardwareProfile, dt_sleep_us: float) -> float:
    if dt_sleep_us < 0:
        raise ValueError("dt_sleep_us must be >= 0")
    return (profile.p_idle_w - profile.p_sleep_w) * dt_sleep_us


def energy_waste(profile: HardwareProfile) -> float:
    return (profile.p_idle_w - profile.p_sleep_w) * profile.t_waste_us


def energy_saved_real(profile: HardwareProfile, dt_sleep_us: float) -> float:
    if dt_sleep_us < profile.t_sleep_min_us:
        raise SleepTooShort(f"{dt_sleep_us} us < minimum {profile.t_sleep_min_us} us")
    return energy_saved_ideal(profile, dt_sleep_us) - energy_waste(profile)


# -- profile files -----------------------------------------------------------

def load_profile(path: str | Path) -> HardwareProfile:
    """Read a ``key=value`` profile file. Times in us, powers in W.

    Blank lines and ``#`` comments are skipped. Missing keys fall back to
    the AR9280 defaults; unknown keys are rejected.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProfileError(f"{path}: {exc}") from exc
    return parse_profile(text, origin=str(path))


def parse_profile(text: str, origin: str = "<string>") -> HardwareProfile:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProfileError(f"{origin}:{lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ProfileError(f"{origin}:{lineno}: duplicate key {key!r}")
        try:
            if key in _TIME_KEYS:
                values[key] = int(raw)
            elif key in _POWER_KEYS:
                values[key] = float(raw)
            elif key == "name":
                values[key] = raw
            else:
                raise ProfileError(f"{origin}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ProfileError):
                raise
            raise ProfileError(f"{origin}:{lineno}: bad value for {key}: {raw!r}") from None
    if values and "name" not in values:
        values["name"] = "custom"
    return default_ar9280().replace(**values)


def format_profile(profile: HardwareProfile) -> str:
    lines = [f"name={profile.name}"]
    lines += [f"{key}={getattr(profile, key)}" for key in _TIME_KEYS + _POWER_KEYS]
    return "\n".join(lines) + "\n"
