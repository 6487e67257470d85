"""Repository of notified PIDs.

Fed at certificate issuance, queried by health authorities to prioritize
testing, with an ownership-checked claim path. Exposed over a minimal
line-oriented TCP protocol and persisted as an append-only file.
"""

from __future__ import annotations

import enum
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from datetime import date

from . import wire
from .certificates import (
    CertificateOfInfection,
    LabDirectory,
    VerificationStatus,
    parse_certificate_lines,
    verify_certificate,
)
from .identity import Pid, prove_pid_ownership


class RejectedCertificate(ValueError):
    """Only verified certificates may feed the repository."""


class ClaimVerdict(enum.Enum):
    CONTACT_CONFIRMED = "CONFIRMED"
    CONTACT_PID_UNKNOWN = "UNKNOWN"
    OWNERSHIP_FAILED = "OWNERSHIP-FAILED"


@dataclass
class NotifiedPidRepository:
    """pid -> (lab_id, test_date); re-insertion keeps the earliest test date."""

    entries: dict[str, tuple[str, date]] = field(default_factory=dict)


def ingest_certificate(
    repo: NotifiedPidRepository,
    cert: CertificateOfInfection,
    directory: LabDirectory,
) -> NotifiedPidRepository:
    if verify_certificate(cert, directory) is not VerificationStatus.VERIFIED:
        raise RejectedCertificate("certificate did not verify against the directory")
    for pid in cert.pids:
        existing = repo.entries.get(pid.value)
        if existing is None or cert.test_date < existing[1]:
            repo.entries[pid.value] = (cert.lab_id, cert.test_date)
    return repo


def is_notified_pid(repo: NotifiedPidRepository, pid: Pid) -> bool:
    return pid.value in repo.entries


def check_test_priority_claim(
    repo: NotifiedPidRepository,
    claimed_contact_pid: Pid,
    claimant_personal_data: str,
    claimant_phrase: str,
    claimant_pid: Pid,
) -> ClaimVerdict:
    """Two checks: is the claimed contact a notified PID, and does the
    claimant own the trusted PID they present."""
    if not is_notified_pid(repo, claimed_contact_pid):
        return ClaimVerdict.CONTACT_PID_UNKNOWN
    if not prove_pid_ownership(claimant_personal_data, claimant_phrase, claimant_pid):
        return ClaimVerdict.OWNERSHIP_FAILED
    return ClaimVerdict.CONTACT_CONFIRMED


def repository_to_lines(repo: NotifiedPidRepository) -> str:
    return "".join(
        f"notified|{pid}|{lab_id}|{test_date.isoformat()}\n"
        for pid, (lab_id, test_date) in sorted(repo.entries.items())
    )


def parse_repository(text: str) -> NotifiedPidRepository:
    repo = NotifiedPidRepository()
    for line in text.splitlines():
        if not line:
            continue
        parts = line.split("|")
        if len(parts) != 4 or parts[0] != "notified":
            raise ValueError(f"malformed repository line: {line!r}")
        pid, lab_id, test_date = parts[1], parts[2], date.fromisoformat(parts[3])
        existing = repo.entries.get(pid)
        if existing is None or test_date < existing[1]:
            repo.entries[pid] = (lab_id, test_date)
    return repo


def load_repository(path: str) -> NotifiedPidRepository:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_repository(f.read())
    except FileNotFoundError:
        return NotifiedPidRepository()


class RegistryService:
    """Transport-independent request processor for the registry protocol.

    Requests (one logical message each):
      QUERY <pid>                                     -> YES | NO
      CLAIM <contact_pid> <claimant_pid> <name%> <phrase%> -> CONFIRMED | UNKNOWN | OWNERSHIP-FAILED
      INGEST + certificate payload line + sig line    -> OK | REJECTED
    """

    def __init__(
        self,
        repo: NotifiedPidRepository,
        directory: LabDirectory,
        persist_path: str | None = None,
    ) -> None:
        self.repo = repo
        self.directory = directory
        self.persist_path = persist_path
        self._lock = threading.Lock()

    def handle_request(self, lines: list[str]) -> str:
        if not lines:
            return "ERROR empty request"
        head = lines[0].split(" ")
        if head[0] == "QUERY" and len(head) == 2 and len(lines) == 1:
            try:
                pid = Pid(head[1])
            except ValueError:
                return "NO"
            return "YES" if is_notified_pid(self.repo, pid) else "NO"
        if head[0] == "CLAIM" and len(head) == 5 and len(lines) == 1:
            try:
                contact_pid = Pid(head[1])
                claimant_pid = Pid(head[2])
            except ValueError:
                return ClaimVerdict.CONTACT_PID_UNKNOWN.value
            verdict = check_test_priority_claim(
                self.repo,
                contact_pid,
                wire.unquote(head[3]),
                wire.unquote(head[4]),
                claimant_pid,
            )
            return verdict.value
        if head[0] == "INGEST" and len(lines) == 3:
            try:
                cert = parse_certificate_lines(lines[1], lines[2])
            except ValueError:
                return "REJECTED"
            with self._lock:
                try:
                    ingest_certificate(self.repo, cert, self.directory)
                except RejectedCertificate:
                    return "REJECTED"
                if self.persist_path:
                    with open(self.persist_path, "a", encoding="utf-8") as f:
                        for pid in cert.pids:
                            lab_id, test_date = self.repo.entries[pid.value]
                            f.write(
                                f"notified|{pid.value}|{lab_id}|{test_date.isoformat()}\n"
                            )
            return "OK"
        return "ERROR malformed request"


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        service: RegistryService = self.server.service  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline()
            if not line:
                return
            first = line.decode("utf-8").rstrip("\n")
            lines = [first]
            if first == "INGEST":
                for _ in range(2):
                    extra = self.rfile.readline()
                    if not extra:
                        break
                    lines.append(extra.decode("utf-8").rstrip("\n"))
            response = service.handle_request(lines)
            self.wfile.write((response + "\n").encode("utf-8"))


class RegistryServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: RegistryService) -> None:
        super().__init__(address, _Handler)
        self.service = service


def serve(
    host: str,
    port: int,
    directory: LabDirectory,
    persist_path: str | None = None,
) -> RegistryServer:
    """Start a registry server (caller drives serve_forever / shutdown)."""
    repo = load_repository(persist_path) if persist_path else NotifiedPidRepository()
    return RegistryServer((host, port), RegistryService(repo, directory, persist_path))


def _roundtrip(host: str, port: int, request_lines: list[str]) -> str:
    with socket.create_connection((host, port), timeout=10) as sock:
        sock.sendall(("".join(line + "\n" for line in request_lines)).encode("utf-8"))
        f = sock.makefile("r", encoding="utf-8")
        response = f.readline().rstrip("\n")
    return response


def client_query(host: str, port: int, pid: Pid) -> str:
    return _roundtrip(host, port, [f"QUERY {pid.value}"])


def client_claim(
    host: str,
    port: int,
    contact_pid: Pid,
    claimant_pid: Pid,
    personal_data: str,
    phrase: str,
) -> str:
    return _roundtrip(
        host,
        port,
        [
            f"CLAIM {contact_pid.value} {claimant_pid.value} "
            f"{wire.quote(personal_data)} {wire.quote(phrase)}"
        ],
    )


def client_ingest(host: str, port: int, cert: CertificateOfInfection) -> str:
    from .certificates import certificate_to_lines

    cert_lines = certificate_to_lines(cert).splitlines()
    return _roundtrip(host, port, ["INGEST", *cert_lines])
