"""The per-device log of significant contacts.

Monotone append, retention-bounded pruning, the cross-check lookup used to
validate incoming notifications, and a bit-exact line serialization with a
pluggable byte-transform (encryption hook, identity by default).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from . import wire
from .encounter import InformationRecord
from .identity import Pad, Pid

DEFAULT_RETENTION_DAYS = 21  # epidemiologists' 2-3 weeks
DEFAULT_TIME_TOLERANCE_S = 300.0

ByteTransform = Callable[[bytes], bytes]


def identity_transform(data: bytes) -> bytes:
    return data


class OutOfOrderEntry(ValueError):
    """Append violated the monotone recorded_at order."""


@dataclass(frozen=True)
class LogEntry:
    own_record: InformationRecord
    peer_record: InformationRecord
    recorded_at: float
    dwell_s: float
    policy_version: int

    def __post_init__(self) -> None:
        if self.own_record.pid == self.peer_record.pid:
            raise ValueError("own and peer PID must differ")


@dataclass
class ContactLog:
    entries: list[LogEntry] = field(default_factory=list)
    retention_days: int = DEFAULT_RETENTION_DAYS


@dataclass(frozen=True)
class ExposureSummary:
    entry_count: int
    distinct_peer_pids: int
    location_counts: dict[str, int]


def append_entry(log: ContactLog, entry: LogEntry) -> ContactLog:
    if log.entries and entry.recorded_at < log.entries[-1].recorded_at:
        raise OutOfOrderEntry(
            f"entry at {entry.recorded_at} older than last {log.entries[-1].recorded_at}"
        )
    log.entries.append(entry)
    return log


def prune(log: ContactLog, now: float) -> ContactLog:
    """Drop entries older than the retention window; boundary entries stay."""
    cutoff = now - log.retention_days * 86400.0
    log.entries = [e for e in log.entries if e.recorded_at >= cutoff]
    return log


def find_matching_contact(
    log: ContactLog,
    claimed_peer_pid: Pid,
    echoed_time: float,
    echoed_location: str,
    time_tolerance_s: float = DEFAULT_TIME_TOLERANCE_S,
) -> LogEntry | None:
    """Cross-check a claimed contact against the own log.

    The claim must name a logged peer PID and echo back the own announced
    location (exact string) and own announced time (within tolerance).
    """
    for entry in log.entries:
        if (
            entry.peer_record.pid == claimed_peer_pid
            and entry.own_record.local_location == echoed_location
            and abs(entry.own_record.local_time - echoed_time) <= time_tolerance_s
        ):
            return entry
    return None


def exposure_statistics(log: ContactLog) -> ExposureSummary:
    locations = Counter(e.own_record.local_location for e in log.entries)
    return ExposureSummary(
        entry_count=len(log.entries),
        distinct_peer_pids=len({e.peer_record.pid for e in log.entries}),
        location_counts=dict(sorted(locations.items())),
    )


def _record_fields(r: InformationRecord) -> str:
    return (
        f"{r.pid.value}|{r.pad.value}|{wire.fmt_num(r.local_time)}"
        f"|{wire.quote(r.local_location)}"
    )


def _parse_record(parts: list[str]) -> InformationRecord:
    return InformationRecord(
        pid=Pid(parts[0]),
        pad=Pad(parts[1]),
        local_time=wire.parse_num(parts[2]),
        local_location=wire.unquote(parts[3]),
    )


def entry_to_line(entry: LogEntry) -> str:
    return (
        f"entry|{wire.fmt_num(entry.recorded_at)}|{wire.fmt_num(entry.dwell_s)}"
        f"|{entry.policy_version}"
        f"|OWN|{_record_fields(entry.own_record)}"
        f"|PEER|{_record_fields(entry.peer_record)}"
    )


def parse_entry_line(line: str) -> LogEntry:
    parts = line.rstrip("\n").split("|")
    if len(parts) != 14 or parts[0] != "entry" or parts[4] != "OWN" or parts[9] != "PEER":
        raise ValueError(f"malformed log entry line: {line!r}")
    return LogEntry(
        own_record=_parse_record(parts[5:9]),
        peer_record=_parse_record(parts[10:14]),
        recorded_at=wire.parse_num(parts[1]),
        dwell_s=wire.parse_num(parts[2]),
        policy_version=int(parts[3]),
    )


def serialize_log(log: ContactLog) -> str:
    return "".join(entry_to_line(e) + "\n" for e in log.entries)


def parse_log(text: str, retention_days: int = DEFAULT_RETENTION_DAYS) -> ContactLog:
    entries = [parse_entry_line(line) for line in text.splitlines() if line]
    return ContactLog(entries=entries, retention_days=retention_days)


def save_log(
    log: ContactLog,
    path: str,
    encode: ByteTransform = identity_transform,
) -> None:
    with open(path, "wb") as f:
        f.write(encode(serialize_log(log).encode("utf-8")))


def load_log(
    path: str,
    retention_days: int = DEFAULT_RETENTION_DAYS,
    decode: ByteTransform = identity_transform,
) -> ContactLog:
    with open(path, "rb") as f:
        text = decode(f.read()).decode("utf-8")
    return parse_log(text, retention_days=retention_days)
