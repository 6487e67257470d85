"""Business visitor log: append-only, hash-chained, tamper-evident.

Each entry's hash covers the previous entry's hash, so any retroactive edit
breaks the chain at a localizable sequence number. Together with the
notified-PID repository this answers fake claims of visits by people later
certified infected.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Callable

from . import wire
from .identity import Pid

GENESIS_HASH = "0" * 64


class OutOfOrderVisit(ValueError):
    pass


class InvalidWindow(ValueError):
    pass


class EvidenceVerdict(enum.Enum):
    VISIT_AND_CERTIFIED = "VISIT-AND-CERTIFIED"
    NO_VISIT_RECORDED = "NO-VISIT-RECORDED"
    NOT_CERTIFIED_SICK = "NOT-CERTIFIED-SICK"


@dataclass(frozen=True)
class ChainedVisit:
    seq: int
    visited_at: float
    pid: Pid
    prev_hash: str
    entry_hash: str


@dataclass
class VisitorLog:
    business_id: str
    chain: list[ChainedVisit] = field(default_factory=list)
    head: str = GENESIS_HASH


@dataclass(frozen=True)
class ChainCheck:
    intact: bool
    tampered_at: int | None = None


def visit_payload(seq: int, visited_at: float, pid: Pid) -> str:
    return f"visit|{seq}|{wire.fmt_num(visited_at)}|{pid.value}"


def _hash_entry(prev_hash: str, seq: int, visited_at: float, pid: Pid) -> str:
    h = hashlib.sha256()
    h.update(bytes.fromhex(prev_hash))
    h.update(visit_payload(seq, visited_at, pid).encode("utf-8"))
    return h.hexdigest()


def append_visit(log: VisitorLog, pid: Pid, visited_at: float) -> VisitorLog:
    if log.chain and visited_at < log.chain[-1].visited_at:
        raise OutOfOrderVisit(
            f"visit at {visited_at} precedes head visit {log.chain[-1].visited_at}"
        )
    seq = log.chain[-1].seq + 1 if log.chain else 1
    prev_hash = log.chain[-1].entry_hash if log.chain else GENESIS_HASH
    entry_hash = _hash_entry(prev_hash, seq, visited_at, pid)
    log.chain.append(
        ChainedVisit(
            seq=seq,
            visited_at=visited_at,
            pid=pid,
            prev_hash=prev_hash,
            entry_hash=entry_hash,
        )
    )
    log.head = entry_hash
    return log


def verify_chain(log: VisitorLog) -> ChainCheck:
    """Recompute every hash and link; report the smallest violating seq.

    A head that does not match the last entry (e.g. truncation with a stale
    head) is reported at the sequence number after the last surviving entry.
    """
    prev_hash = GENESIS_HASH
    expected_seq = 1
    for visit in log.chain:
        if (
            visit.seq != expected_seq
            or visit.prev_hash != prev_hash
            or visit.entry_hash
            != _hash_entry(visit.prev_hash, visit.seq, visit.visited_at, visit.pid)
        ):
            return ChainCheck(intact=False, tampered_at=expected_seq)
        prev_hash = visit.entry_hash
        expected_seq += 1
    if log.head != prev_hash:
        return ChainCheck(intact=False, tampered_at=expected_seq)
    return ChainCheck(intact=True)


def evidence_query(
    log: VisitorLog,
    claimant_pid: Pid,
    window_from: float,
    window_to: float,
    repo_query: Callable[[Pid], bool],
) -> EvidenceVerdict:
    """Did the claimant visit during the window, and are they certified sick?"""
    if window_from > window_to:
        raise InvalidWindow(f"from {window_from} > to {window_to}")
    visited = any(
        v.pid == claimant_pid and window_from <= v.visited_at <= window_to
        for v in log.chain
    )
    if not visited:
        return EvidenceVerdict.NO_VISIT_RECORDED
    if not repo_query(claimant_pid):
        return EvidenceVerdict.NOT_CERTIFIED_SICK
    return EvidenceVerdict.VISIT_AND_CERTIFIED


def chain_to_lines(log: VisitorLog) -> str:
    out = []
    for v in log.chain:
        out.append(visit_payload(v.seq, v.visited_at, v.pid))
        out.append(f"hash|{v.entry_hash}")
    return "".join(line + "\n" for line in out)


def head_to_line(log: VisitorLog) -> str:
    return f"head|{log.head}\n"


def parse_chain(business_id: str, chain_text: str, head_text: str) -> VisitorLog:
    lines = [line for line in chain_text.splitlines() if line]
    if len(lines) % 2 != 0:
        raise ValueError("chain file must pair each visit line with a hash line")
    chain: list[ChainedVisit] = []
    prev_hash = GENESIS_HASH
    for i in range(0, len(lines), 2):
        vparts = lines[i].split("|")
        hparts = lines[i + 1].split("|")
        if len(vparts) != 4 or vparts[0] != "visit" or len(hparts) != 2 or hparts[0] != "hash":
            raise ValueError(f"malformed chain lines: {lines[i]!r} / {lines[i + 1]!r}")
        visit = ChainedVisit(
            seq=int(vparts[1]),
            visited_at=wire.parse_num(vparts[2]),
            pid=Pid(vparts[3]),
            prev_hash=prev_hash,
            entry_hash=hparts[1],
        )
        chain.append(visit)
        prev_hash = visit.entry_hash
    head_line = head_text.strip()
    hparts = head_line.split("|")
    if len(hparts) != 2 or hparts[0] != "head":
        raise ValueError(f"malformed head line: {head_line!r}")
    return VisitorLog(business_id=business_id, chain=chain, head=hparts[1])


def save_chain(log: VisitorLog, chain_path: str, head_path: str) -> None:
    with open(chain_path, "w", encoding="utf-8") as f:
        f.write(chain_to_lines(log))
    with open(head_path, "w", encoding="utf-8") as f:
        f.write(head_to_line(log))


def load_chain(business_id: str, chain_path: str, head_path: str) -> VisitorLog:
    with open(chain_path, encoding="utf-8") as f:
        chain_text = f.read()
    with open(head_path, encoding="utf-8") as f:
        head_text = f.read()
    return parse_chain(business_id, chain_text, head_text)
