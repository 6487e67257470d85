"""Notification build, store-and-forward delivery, and receiver verification.

The PAD transport is a mailbox store (in-memory or directory-backed) so the
protocol runs hermetically; real e-mail semantics are out of scope.
"""

from __future__ import annotations

import enum
import os
import threading
from dataclasses import dataclass

from . import wire
from .certificates import (
    CertificateOfInfection,
    LabDirectory,
    VerificationStatus,
    certificate_to_lines,
    parse_certificate_lines,
    pids_covering_contact,
    verify_certificate,
)
from .contactlog import (
    DEFAULT_TIME_TOLERANCE_S,
    ContactLog,
    LogEntry,
    find_matching_contact,
)
from .identity import MalformedPad, Pad, Pid


class UncoveredPid(ValueError):
    """A log entry's own PID is missing from the supplied certificate."""


class DeploymentMode(enum.Enum):
    CERTIFICATE_REQUIRED = "required"
    CERTIFICATE_OPTIONAL = "optional"


class VerdictStatus(enum.Enum):
    ACCEPTED = "ACCEPTED"
    ACCEPTED_UNCERTIFIED = "ACCEPTED-UNCERTIFIED"
    REJECTED_NO_MATCHING_CONTACT = "REJECTED-NO-MATCHING-CONTACT"
    REJECTED_UNKNOWN_LAB = "REJECTED-UNKNOWN-LAB"
    REJECTED_BAD_SIGNATURE = "REJECTED-BAD-SIGNATURE"
    REJECTED_PID_NOT_IN_CERTIFICATE = "REJECTED-PID-NOT-IN-CERTIFICATE"


ACCEPTED_STATUSES = frozenset(
    {VerdictStatus.ACCEPTED, VerdictStatus.ACCEPTED_UNCERTIFIED}
)


@dataclass(frozen=True)
class Notification:
    """Warning to a past contact: the sender's PID plus the recipient's own
    announced time/location echoed back, optionally with the certificate."""

    sender_pid: Pid
    echoed_time: float
    echoed_location: str
    certificate: CertificateOfInfection | None = None


@dataclass(frozen=True)
class VerificationVerdict:
    status: VerdictStatus
    matched_entry: LogEntry | None = None

    @property
    def accepted(self) -> bool:
        return self.status in ACCEPTED_STATUSES


def build_notifications(
    log: ContactLog,
    own_pids: list[Pid] | tuple[Pid, ...],
    certificate: CertificateOfInfection | None = None,
) -> list[tuple[Pad, Notification]]:
    """One notification per log entry announced under one of own_pids.

    When a certificate is supplied it must cover every notified entry's own
    PID ("all relevant PIDs declared"); otherwise UncoveredPid is raised.
    """
    own = set(own_pids)
    out: list[tuple[Pad, Notification]] = []
    for entry in log.entries:
        if entry.own_record.pid not in own:
            continue
        if certificate is not None and entry.own_record.pid not in certificate.pids:
            raise UncoveredPid(
                f"log entry PID {entry.own_record.pid.value} not in certificate"
            )
        out.append(
            (
                entry.peer_record.pad,
                Notification(
                    sender_pid=entry.own_record.pid,
                    echoed_time=entry.peer_record.local_time,
                    echoed_location=entry.peer_record.local_location,
                    certificate=certificate,
                ),
            )
        )
    return out


def verify_notification(
    n: Notification,
    log: ContactLog,
    directory: LabDirectory,
    mode: DeploymentMode = DeploymentMode.CERTIFICATE_REQUIRED,
    time_tolerance_s: float = DEFAULT_TIME_TOLERANCE_S,
) -> VerificationVerdict:
    """Receiver-side pipeline: contact cross-check, certificate check, PID coverage."""
    entry = find_matching_contact(
        log, n.sender_pid, n.echoed_time, n.echoed_location, time_tolerance_s
    )
    if entry is None:
        return VerificationVerdict(VerdictStatus.REJECTED_NO_MATCHING_CONTACT)
    if n.certificate is None:
        if mode is DeploymentMode.CERTIFICATE_OPTIONAL:
            return VerificationVerdict(VerdictStatus.ACCEPTED_UNCERTIFIED, entry)
        return VerificationVerdict(VerdictStatus.REJECTED_BAD_SIGNATURE)
    status = verify_certificate(n.certificate, directory)
    if status is VerificationStatus.UNKNOWN_LAB:
        return VerificationVerdict(VerdictStatus.REJECTED_UNKNOWN_LAB)
    if status is VerificationStatus.BAD_SIGNATURE:
        return VerificationVerdict(VerdictStatus.REJECTED_BAD_SIGNATURE)
    covering = pids_covering_contact(n.certificate, entry.own_record.local_time)
    if n.sender_pid not in n.certificate.pids or n.sender_pid not in covering:
        return VerificationVerdict(VerdictStatus.REJECTED_PID_NOT_IN_CERTIFICATE)
    return VerificationVerdict(VerdictStatus.ACCEPTED, entry)


def notification_to_lines(n: Notification) -> str:
    head = (
        f"notif|v1|{n.sender_pid.value}|{wire.fmt_num(n.echoed_time)}"
        f"|{wire.quote(n.echoed_location)}\n"
    )
    if n.certificate is None:
        return head
    return head + certificate_to_lines(n.certificate)


def parse_notifications(text: str) -> list[Notification]:
    """Parse a stream of wire-format notifications (1 or 3 lines each)."""
    out: list[Notification] = []
    lines = [line for line in text.splitlines() if line]
    i = 0
    while i < len(lines):
        parts = lines[i].split("|")
        if len(parts) != 5 or parts[0] != "notif" or parts[1] != "v1":
            raise ValueError(f"malformed notification line: {lines[i]!r}")
        cert = None
        consumed = 1
        if i + 1 < len(lines) and lines[i + 1].startswith("cert|"):
            if i + 2 >= len(lines):
                raise ValueError("certificate payload without signature line")
            cert = parse_certificate_lines(lines[i + 1], lines[i + 2])
            consumed = 3
        out.append(
            Notification(
                sender_pid=Pid(parts[2]),
                echoed_time=wire.parse_num(parts[3]),
                echoed_location=wire.unquote(parts[4]),
                certificate=cert,
            )
        )
        i += consumed
    return out


def _as_pad(pad: Pad | str) -> Pad:
    return pad if isinstance(pad, Pad) else Pad(pad)


class MailboxStore:
    """In-memory store-and-forward transport keyed by PAD."""

    def __init__(self) -> None:
        self._boxes: dict[str, list[Notification]] = {}
        self._lock = threading.Lock()

    def deliver(self, pad: Pad | str, n: Notification) -> None:
        pad = _as_pad(pad)
        with self._lock:
            self._boxes.setdefault(pad.value, []).append(n)

    def poll(self, pad: Pad | str) -> list[Notification]:
        pad = _as_pad(pad)
        with self._lock:
            return self._boxes.pop(pad.value, [])

    def pending_count(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._boxes.values())


class FileMailboxStore:
    """Directory-backed mailbox store: one file per percent-encoded PAD."""

    def __init__(self, root: str) -> None:
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, pad: Pad) -> str:
        return os.path.join(self.root, wire.quote(pad.value))

    def deliver(self, pad: Pad | str, n: Notification) -> None:
        pad = _as_pad(pad)
        with self._lock:
            with open(self._path(pad), "a", encoding="utf-8") as f:
                f.write(notification_to_lines(n))

    def poll(self, pad: Pad | str) -> list[Notification]:
        pad = _as_pad(pad)
        with self._lock:
            path = self._path(pad)
            if not os.path.exists(path):
                return []
            with open(path, encoding="utf-8") as f:
                text = f.read()
            os.remove(path)
            return parse_notifications(text)

    def pending_count(self) -> int:
        with self._lock:
            total = 0
            for name in os.listdir(self.root):
                with open(os.path.join(self.root, name), encoding="utf-8") as f:
                    total += len(parse_notifications(f.read()))
            return total


def deliver(store: MailboxStore | FileMailboxStore, pad: Pad | str, n: Notification) -> None:
    """Append a notification to the mailbox for pad (created on first use)."""
    store.deliver(pad, n)


def poll_mailbox(store: MailboxStore | FileMailboxStore, pad: Pad | str) -> list[Notification]:
    """Drain and return all pending notifications for pad."""
    return store.poll(pad)
