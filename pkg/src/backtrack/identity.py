"""Pseudonymous identities.

Random pseudo-IDs (PIDs), mailbox-style pseudo-addresses (PADs), and
hash-committed "trusted" PIDs whose ownership can later be proven by
revealing the committed name/phrase pair.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from . import wire

PID_HEX_LEN = 32
# byte separator in the commitment preimage; prevents ("ab","c") == ("a","bc")
_COMMIT_SEP = "\x1f"
_FORBIDDEN_PID_CHARS = frozenset("|,")


class EmptyInput(ValueError):
    """A required string argument was empty."""


class InvalidWindow(ValueError):
    """A time window with from > to."""


class MalformedPad(ValueError):
    """A pseudo-address that is not of the form local@domain."""


@dataclass(frozen=True, order=True)
class Pid:
    """Opaque pseudo-ID: 1-64 printable non-whitespace chars, no `|` or `,`."""

    value: str

    def __post_init__(self) -> None:
        v = self.value
        if not 1 <= len(v) <= 64:
            raise ValueError(f"PID length must be 1-64, got {len(v)}")
        for c in v:
            if c in _FORBIDDEN_PID_CHARS or c.isspace() or not c.isprintable():
                raise ValueError(f"PID contains forbidden character {c!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class Pad:
    """Mailbox-style pseudo-address `local@domain`; routing is opaque."""

    value: str

    def __post_init__(self) -> None:
        v = self.value
        if "|" in v:
            raise MalformedPad("PAD must not contain '|'")
        local, sep, domain = v.partition("@")
        if not sep or not local or not domain or "@" in domain:
            raise MalformedPad(f"PAD must be local@domain, got {v!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TrustedPidCommitment:
    """A PID derived by hashing (personal_data, phrase); phrase stays secret."""

    personal_data: str
    phrase: str
    pid: Pid


@dataclass(frozen=True)
class IdentityPeriod:
    """The PIDs one user announced over a period, with activation times.

    Each PID is active from its activation timestamp until the next PID's
    activation; the last PID stays active for the rest of the period.
    """

    pids: tuple[tuple[float, Pid], ...]
    pad: Pad

    def __post_init__(self) -> None:
        if not self.pids:
            raise ValueError("identity period needs at least one PID")
        times = [t for t, _ in self.pids]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("activation timestamps must be strictly increasing")


def generate_random_pid(rng_seed: int | random.Random) -> Pid:
    """Draw a 32-hex-char PID; deterministic for a fixed seed."""
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    return Pid(f"{rng.getrandbits(128):032x}")


def _commitment_digest(personal_data: str, phrase: str) -> str:
    preimage = (personal_data + _COMMIT_SEP + phrase).encode("utf-8")
    return hashlib.sha256(preimage).hexdigest()[:PID_HEX_LEN]


def generate_trusted_pid(personal_data: str, phrase: str) -> TrustedPidCommitment:
    """Derive a PID as a one-way hash over (personal_data, phrase)."""
    if not personal_data or not phrase:
        raise EmptyInput("personal_data and phrase must be non-empty")
    pid = Pid(_commitment_digest(personal_data, phrase))
    return TrustedPidCommitment(personal_data=personal_data, phrase=phrase, pid=pid)


def prove_pid_ownership(personal_data: str, phrase: str, claimed: Pid) -> bool:
    """True iff the claimed PID was derived from exactly this data/phrase pair."""
    if not personal_data or not phrase:
        return False
    return _commitment_digest(personal_data, phrase) == claimed.value


def active_pids_in_window(period: IdentityPeriod, window_from: float, window_to: float) -> list[Pid]:
    """Every PID whose activation interval intersects [window_from, window_to]."""
    if window_from > window_to:
        raise InvalidWindow(f"from {window_from} > to {window_to}")
    active: list[Pid] = []
    entries = period.pids
    for i, (start, pid) in enumerate(entries):
        end = entries[i + 1][0] if i + 1 < len(entries) else None
        if start <= window_to and (end is None or end > window_from):
            active.append(pid)
    return active


def commitment_to_line(c: TrustedPidCommitment) -> str:
    """Persisted commitment record; the secret phrase is never written."""
    return f"trusted-pid|{c.pid.value}|{wire.quote(c.personal_data)}|"


def parse_commitment_line(line: str) -> tuple[Pid, str]:
    """Parse a persisted commitment into (pid, personal_data)."""
    parts = line.rstrip("\n").split("|")
    if len(parts) != 4 or parts[0] != "trusted-pid" or parts[3] != "":
        raise ValueError(f"malformed commitment line: {line!r}")
    return Pid(parts[1]), wire.unquote(parts[2])
