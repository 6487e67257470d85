"""Certificates of infection.

A lab signs a canonical payload binding one or more PIDs to a positive test
date and an infectious-from date. Verification resolves the lab's public key
through a flat-file directory.
"""

from __future__ import annotations

import base64
import enum
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .identity import Pid

SCHEME_ED25519 = "ed25519"


class EmptyPidList(ValueError):
    pass


class InvalidDates(ValueError):
    pass


class VerificationStatus(enum.Enum):
    VERIFIED = "VERIFIED"
    UNKNOWN_LAB = "UNKNOWN-LAB"
    BAD_SIGNATURE = "BAD-SIGNATURE"


@dataclass(frozen=True)
class LabIdentity:
    lab_id: str
    private_key: Ed25519PrivateKey

    @classmethod
    def generate(cls, lab_id: str) -> "LabIdentity":
        return cls(lab_id=lab_id, private_key=Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, lab_id: str, seed: bytes) -> "LabIdentity":
        """Deterministic keypair from 32 seed bytes (simulator reproducibility)."""
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        return cls(lab_id=lab_id, private_key=Ed25519PrivateKey.from_private_bytes(seed))

    def public_key(self) -> Ed25519PublicKey:
        return self.private_key.public_key()

    def public_bytes(self) -> bytes:
        from cryptography.hazmat.primitives.serialization import (
            Encoding,
            PublicFormat,
        )

        return self.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def private_bytes(self) -> bytes:
        from cryptography.hazmat.primitives.serialization import (
            Encoding,
            NoEncryption,
            PrivateFormat,
        )

        return self.private_key.private_bytes(
            Encoding.Raw, PrivateFormat.Raw, NoEncryption()
        )


class LabDirectory:
    """Published lab_id -> (scheme, raw public key) map; immutable after load."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[str, bytes]] = {}

    def add(self, lab_id: str, public_key: bytes, scheme: str = SCHEME_ED25519) -> None:
        if lab_id in self._entries:
            raise ValueError(f"duplicate lab_id {lab_id!r}")
        self._entries[lab_id] = (scheme, public_key)

    def add_lab(self, lab: LabIdentity) -> None:
        self.add(lab.lab_id, lab.public_bytes())

    def lookup(self, lab_id: str) -> tuple[str, bytes] | None:
        return self._entries.get(lab_id)

    def lab_ids(self) -> list[str]:
        return sorted(self._entries)

    def to_lines(self) -> str:
        return "".join(
            f"lab|{lab_id}|{scheme}|{base64.b64encode(key).decode('ascii')}\n"
            for lab_id, (scheme, key) in sorted(self._entries.items())
        )

    @classmethod
    def from_lines(cls, text: str) -> "LabDirectory":
        directory = cls()
        for line in text.splitlines():
            if not line:
                continue
            parts = line.split("|")
            if len(parts) != 4 or parts[0] != "lab":
                raise ValueError(f"malformed directory line: {line!r}")
            directory.add(parts[1], base64.b64decode(parts[3]), scheme=parts[2])
        return directory


@dataclass(frozen=True)
class CertificateOfInfection:
    lab_id: str
    test_date: date
    infectious_from: date
    pids: tuple[Pid, ...]
    signature: bytes


def canonical_certificate_payload(
    lab_id: str,
    test_date: date,
    infectious_from: date,
    pids: tuple[Pid, ...],
) -> bytes:
    """Deterministic signing payload; injective because PIDs exclude `|` and `,`."""
    joined = ",".join(p.value for p in pids)
    return (
        f"cert|v1|{lab_id}|{test_date.isoformat()}|{infectious_from.isoformat()}|{joined}"
    ).encode("utf-8")


def issue_certificate(
    lab: LabIdentity,
    pids: list[Pid] | tuple[Pid, ...],
    test_date: date,
    infectious_from: date,
) -> CertificateOfInfection:
    if not pids:
        raise EmptyPidList("certificate needs at least one PID")
    if len(set(pids)) != len(pids):
        raise ValueError("duplicate PIDs in certificate")
    if infectious_from > test_date:
        raise InvalidDates(f"infectious_from {infectious_from} after test_date {test_date}")
    pids = tuple(pids)
    payload = canonical_certificate_payload(lab.lab_id, test_date, infectious_from, pids)
    return CertificateOfInfection(
        lab_id=lab.lab_id,
        test_date=test_date,
        infectious_from=infectious_from,
        pids=pids,
        signature=lab.private_key.sign(payload),
    )


def verify_certificate(
    cert: CertificateOfInfection, directory: LabDirectory
) -> VerificationStatus:
    entry = directory.lookup(cert.lab_id)
    if entry is None:
        return VerificationStatus.UNKNOWN_LAB
    scheme, key_bytes = entry
    if scheme != SCHEME_ED25519:
        return VerificationStatus.UNKNOWN_LAB
    payload = canonical_certificate_payload(
        cert.lab_id, cert.test_date, cert.infectious_from, cert.pids
    )
    try:
        Ed25519PublicKey.from_public_bytes(key_bytes).verify(cert.signature, payload)
    except (InvalidSignature, ValueError):
        return VerificationStatus.BAD_SIGNATURE
    return VerificationStatus.VERIFIED


def _day_start(d: date) -> float:
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp()


def pids_covering_contact(
    cert: CertificateOfInfection,
    contact_time: float,
    post_test_margin_days: int = 0,
) -> tuple[Pid, ...]:
    """The certificate's PIDs when the contact falls inside the infectious
    window [infectious_from 00:00, test_date end-of-day + margin], else empty."""
    window_start = _day_start(cert.infectious_from)
    window_end = _day_start(cert.test_date + timedelta(days=1 + post_test_margin_days))
    if window_start <= contact_time < window_end:
        return cert.pids
    return ()


def certificate_to_lines(cert: CertificateOfInfection) -> str:
    payload = canonical_certificate_payload(
        cert.lab_id, cert.test_date, cert.infectious_from, cert.pids
    )
    sig = base64.b64encode(cert.signature).decode("ascii")
    return payload.decode("utf-8") + "\n" + f"sig|{sig}\n"


def parse_certificate_lines(payload_line: str, sig_line: str) -> CertificateOfInfection:
    parts = payload_line.rstrip("\n").split("|")
    if len(parts) != 6 or parts[0] != "cert" or parts[1] != "v1":
        raise ValueError(f"malformed certificate payload: {payload_line!r}")
    sig_parts = sig_line.rstrip("\n").split("|")
    if len(sig_parts) != 2 or sig_parts[0] != "sig":
        raise ValueError(f"malformed signature line: {sig_line!r}")
    return CertificateOfInfection(
        lab_id=parts[2],
        test_date=date.fromisoformat(parts[3]),
        infectious_from=date.fromisoformat(parts[4]),
        pids=tuple(Pid(v) for v in parts[5].split(",")),
        signature=base64.b64decode(sig_parts[1]),
    )


def parse_certificate_text(text: str) -> CertificateOfInfection:
    lines = [line for line in text.splitlines() if line]
    if len(lines) != 2:
        raise ValueError("certificate file must hold a payload line and a sig line")
    return parse_certificate_lines(lines[0], lines[1])
