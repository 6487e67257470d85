"""Contact identification.

Beacon exchange of information records, log-distance RSSI <-> distance
conversion, session accumulation per peer PID, and the versioned
significant-contact decision rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import wire
from .identity import Pad, Pid


class NonPositiveDistance(ValueError):
    """distance_to_rssi needs a strictly positive distance."""


class ClockRegression(ValueError):
    """A beacon sample timestamped before the session's last sample."""


@dataclass(frozen=True)
class InformationRecord:
    """The four-field beacon payload: PID, PAD, local time, local location label."""

    pid: Pid
    pad: Pad
    local_time: float
    local_location: str

    def __post_init__(self) -> None:
        if "|" in self.local_location:
            raise ValueError("location label must not contain '|'")


@dataclass(frozen=True)
class RssiSample:
    at: float
    rssi_dbm: float

    def __post_init__(self) -> None:
        if not -120.0 <= self.rssi_dbm <= 0.0:
            raise ValueError(f"RSSI {self.rssi_dbm} outside [-120, 0] dBm")


@dataclass(frozen=True)
class SignificancePolicy:
    """Versioned (max distance, min contiguous dwell) contact rule."""

    version: int
    max_distance_m: float
    min_duration_s: float

    def __post_init__(self) -> None:
        if self.version < 1:
            raise ValueError("policy version must be positive")
        if self.max_distance_m <= 0 or self.min_duration_s < 0:
            raise ValueError("policy thresholds out of range")


# default policy generations: pessimistic 3.0 m first, tightened to 1.5 m later
POLICY_V1 = SignificancePolicy(version=1, max_distance_m=3.0, min_duration_s=600.0)
POLICY_V2 = SignificancePolicy(version=2, max_distance_m=1.5, min_duration_s=600.0)

DEFAULT_BEACON_INTERVAL_S = 10.0
DEFAULT_GAP_TIMEOUT_S = 60.0


@dataclass(frozen=True)
class ChannelModel:
    """Log-distance path-loss channel with lognormal shadowing."""

    ref_power_dbm: float = -59.0
    path_loss_exponent: float = 2.0
    shadowing_sigma_db: float = 0.0
    body_shadow_db: float = 0.0

    def __post_init__(self) -> None:
        if not 1.0 <= self.path_loss_exponent <= 6.0:
            raise ValueError("path loss exponent must be in [1, 6]")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing sigma must be >= 0")


@dataclass
class ContactSession:
    """An open run of beacons with one peer; records are fixed at first beacon."""

    own_record: InformationRecord
    peer_record: InformationRecord
    samples: list[RssiSample]
    started: float
    last_seen: float


@dataclass(frozen=True)
class SignificanceVerdict:
    significant: bool
    dwell_s: float


SessionTable = dict[str, ContactSession]


def rssi_to_distance(rssi_dbm: float, model: ChannelModel) -> float:
    """Invert the log-distance model: d = 10^((ref - rssi) / (10 n))."""
    exponent = (model.ref_power_dbm - rssi_dbm) / (10.0 * model.path_loss_exponent)
    return 10.0 ** exponent


def distance_to_rssi(
    true_distance_m: float,
    model: ChannelModel,
    noise_draw: float = 0.0,
    body_blocked: bool = False,
) -> float:
    """Forward channel for the simulator; exact inverse of rssi_to_distance
    when noise_draw is 0 and the path is unblocked."""
    if true_distance_m <= 0:
        raise NonPositiveDistance(f"distance must be > 0, got {true_distance_m}")
    rssi = model.ref_power_dbm - 10.0 * model.path_loss_exponent * math.log10(true_distance_m)
    rssi += noise_draw * model.shadowing_sigma_db
    if body_blocked:
        rssi -= model.body_shadow_db
    return rssi


def ingest_beacon(
    session_table: SessionTable,
    own: InformationRecord,
    peer: InformationRecord,
    sample: RssiSample,
    gap_timeout_s: float = DEFAULT_GAP_TIMEOUT_S,
) -> ContactSession | None:
    """Feed one received beacon into the session table.

    Appends to the open session for the peer PID, or closes it (returning it
    for classification) and opens a fresh one when the gap since the last
    sample exceeds gap_timeout_s.
    """
    key = peer.pid.value
    open_session = session_table.get(key)
    closed: ContactSession | None = None
    if open_session is not None:
        if sample.at < open_session.last_seen:
            raise ClockRegression(
                f"sample at {sample.at} precedes session last_seen {open_session.last_seen}"
            )
        if sample.at - open_session.last_seen > gap_timeout_s:
            closed = session_table.pop(key)
            open_session = None
    if open_session is None:
        session_table[key] = ContactSession(
            own_record=own,
            peer_record=peer,
            samples=[sample],
            started=sample.at,
            last_seen=sample.at,
        )
    else:
        open_session.samples.append(sample)
        open_session.last_seen = sample.at
    return closed


def classify_contact(
    session: ContactSession,
    policy: SignificancePolicy,
    model: ChannelModel,
) -> SignificanceVerdict:
    """Decide significance from the longest contiguous in-threshold dwell.

    Dwell between consecutive samples counts only when both per-sample
    distance estimates are within the policy's distance threshold.
    """
    within = [
        rssi_to_distance(s.rssi_dbm, model) <= policy.max_distance_m
        for s in session.samples
    ]
    best = 0.0
    run = 0.0
    for i in range(1, len(session.samples)):
        if within[i - 1] and within[i]:
            run += session.samples[i].at - session.samples[i - 1].at
            best = max(best, run)
        else:
            run = 0.0
    significant = any(within) and best >= policy.min_duration_s
    return SignificanceVerdict(significant=significant, dwell_s=best)


def close_expired_sessions(
    session_table: SessionTable,
    now: float,
    gap_timeout_s: float = DEFAULT_GAP_TIMEOUT_S,
) -> list[ContactSession]:
    """Remove and return every session idle for longer than gap_timeout_s."""
    stale_keys = sorted(
        k for k, s in session_table.items() if s.last_seen + gap_timeout_s < now
    )
    return [session_table.pop(k) for k in stale_keys]


def policy_to_line(policy: SignificancePolicy) -> str:
    return (
        f"policy|{policy.version}|{wire.fmt_num(policy.max_distance_m)}"
        f"|{wire.fmt_num(policy.min_duration_s)}"
    )


def parse_policy_line(line: str) -> SignificancePolicy:
    parts = line.rstrip("\n").split("|")
    if len(parts) != 4 or parts[0] != "policy":
        raise ValueError(f"malformed policy line: {line!r}")
    return SignificancePolicy(
        version=int(parts[1]),
        max_distance_m=wire.parse_num(parts[2]),
        min_duration_s=wire.parse_num(parts[3]),
    )
