"""Trace-driven micro-sleep energy analysis for 802.11a stations."""

__version__ = "0.1.0"

from .accounting import ActivityLedger, StateTimes, account, account_file, energy_report, prepare
from .analysis import ApplicabilityQuery, clock_power, l_min, sleep_efficiency
from .engine import Doze, NavIgnored, StationContext, Stay, StayReason, on_frame, set_sleep
from .frames import DurationId, FrameKind, FrameRecord, MacAddress, PHY_11A, frame_airtime_us, parse_header
from .hardware import HardwareProfile, default_ar9280, load_profile
from .loss import ErrorModelParams, ploss_neyman, ploss_single_bit

__all__ = [
    "ActivityLedger", "StateTimes", "account", "account_file", "energy_report", "prepare",
    "ApplicabilityQuery", "clock_power", "l_min", "sleep_efficiency",
    "Doze", "NavIgnored", "StationContext", "Stay", "StayReason", "on_frame", "set_sleep",
    "DurationId", "FrameKind", "FrameRecord", "MacAddress", "PHY_11A", "frame_airtime_us", "parse_header",
    "HardwareProfile", "default_ar9280", "load_profile",
    "ErrorModelParams", "ploss_neyman", "ploss_single_bit",
]
