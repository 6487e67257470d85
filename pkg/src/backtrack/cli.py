"""Command-line entry points for every protocol role.

Exit codes: 0 success, 1 protocol-level rejection (verification failed,
unknown PID, tampered chain, ...), 2 usage or input error. Machine-readable
output goes to stdout only.
"""

from __future__ import annotations

import argparse
import base64
import sys
from datetime import date

from . import bizlog, contactlog, registry, wire
from .certificates import (
    LabIdentity,
    LabDirectory,
    VerificationStatus,
    certificate_to_lines,
    issue_certificate,
    parse_certificate_text,
    verify_certificate,
)
from .identity import (
    MalformedPad,
    Pid,
    commitment_to_line,
    generate_random_pid,
    generate_trusted_pid,
)
from .notify import (
    DeploymentMode,
    FileMailboxStore,
    build_notifications,
    parse_notifications,
    verify_notification,
)
from .sim import InvalidScenario, metrics_to_lines, parse_scenario, run_scenario

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2


class InputError(Exception):
    """Malformed or missing input file / value; maps to exit code 2."""


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _parse_pids(csv: str) -> list[Pid]:
    try:
        return [Pid(v) for v in csv.split(",") if v]
    except ValueError as exc:
        raise InputError(f"bad PID list {csv!r}: {exc}") from exc


def _load_directory(path: str) -> LabDirectory:
    try:
        return LabDirectory.from_lines(_read_text(path))
    except ValueError as exc:
        raise InputError(f"bad directory file {path}: {exc}") from exc


def _load_lab_key(path: str) -> LabIdentity:
    line = _read_text(path).strip()
    parts = line.split("|")
    if len(parts) != 4 or parts[0] != "labkey" or parts[2] != "ed25519":
        raise InputError(f"malformed lab key file {path}")
    try:
        return LabIdentity.from_seed(parts[1], base64.b64decode(parts[3]))
    except ValueError as exc:
        raise InputError(f"bad lab key material: {exc}") from exc


def _load_log(path: str, retention_days: int = 21) -> contactlog.ContactLog:
    try:
        return contactlog.parse_log(_read_text(path), retention_days=retention_days)
    except ValueError as exc:
        raise InputError(f"bad log file {path}: {exc}") from exc


def _load_chain(args) -> bizlog.VisitorLog:
    try:
        return bizlog.parse_chain(
            args.business_id if hasattr(args, "business_id") else "business",
            _read_text(args.chain),
            _read_text(args.head),
        )
    except ValueError as exc:
        raise InputError(f"bad chain files: {exc}") from exc


# -- subcommand handlers ----------------------------------------------------


def cmd_pid(args) -> int:
    if args.pid_mode == "random":
        print(generate_random_pid(args.seed).value)
        return EXIT_OK
    commitment = generate_trusted_pid(args.name, args.phrase)
    if args.commitment_file:
        with open(args.commitment_file, "w", encoding="utf-8") as f:
            f.write(commitment_to_line(commitment) + "\n")
    print(commitment.pid.value)
    return EXIT_OK


def cmd_sim(args) -> int:
    try:
        scenario = parse_scenario(_read_text(args.scenario))
    except InvalidScenario as exc:
        raise InputError(f"bad scenario: {exc}") from exc
    metrics, trace = run_scenario(scenario)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write("".join(line + "\n" for line in trace))
    sys.stdout.write(metrics_to_lines(metrics))
    return EXIT_OK


def cmd_cert(args) -> int:
    if args.cert_mode == "keygen":
        lab = LabIdentity.generate(args.lab_id)
        seed = base64.b64encode(lab.private_bytes()).decode("ascii")
        with open(args.key_out, "w", encoding="utf-8") as f:
            f.write(f"labkey|{args.lab_id}|ed25519|{seed}\n")
        with open(args.directory, "a", encoding="utf-8") as f:
            pub = base64.b64encode(lab.public_bytes()).decode("ascii")
            f.write(f"lab|{args.lab_id}|ed25519|{pub}\n")
        print(args.lab_id)
        return EXIT_OK
    if args.cert_mode == "issue":
        lab = _load_lab_key(args.key)
        try:
            cert = issue_certificate(
                lab,
                _parse_pids(args.pids),
                test_date=date.fromisoformat(args.test_date),
                infectious_from=date.fromisoformat(args.infectious_from),
            )
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(certificate_to_lines(cert))
        print(args.out)
        return EXIT_OK
    # verify
    try:
        cert = parse_certificate_text(_read_text(args.cert))
    except ValueError as exc:
        raise InputError(f"bad certificate file: {exc}") from exc
    status = verify_certificate(cert, _load_directory(args.directory))
    print(status.value)
    return EXIT_OK if status is VerificationStatus.VERIFIED else EXIT_REJECTED


def cmd_notify(args) -> int:
    if args.notify_mode == "build":
        log = _load_log(args.log)
        cert = None
        if args.cert:
            try:
                cert = parse_certificate_text(_read_text(args.cert))
            except ValueError as exc:
                raise InputError(f"bad certificate file: {exc}") from exc
        try:
            pairs = build_notifications(log, _parse_pids(args.own_pids), cert)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        store = FileMailboxStore(args.mailbox_dir)
        for pad, n in pairs:
            store.deliver(pad, n)
            print(f"sent|{pad.value}")
        return EXIT_OK
    # verify
    log = _load_log(args.log)
    directory = _load_directory(args.directory)
    try:
        notifications = parse_notifications(_read_text(args.notification))
    except ValueError as exc:
        raise InputError(f"bad notification file: {exc}") from exc
    if not notifications:
        raise InputError("notification file is empty")
    mode = (
        DeploymentMode.CERTIFICATE_OPTIONAL
        if args.mode == "optional"
        else DeploymentMode.CERTIFICATE_REQUIRED
    )
    verdict = verify_notification(
        notifications[0], log, directory, mode=mode, time_tolerance_s=args.tolerance
    )
    print(verdict.status.value)
    if verdict.matched_entry is not None:
        print(contactlog.entry_to_line(verdict.matched_entry))
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


def cmd_registry(args) -> int:
    if args.registry_mode == "serve":
        directory = _load_directory(args.directory)
        server = registry.serve(args.host, args.port, directory, args.state)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()
        return EXIT_OK
    try:
        if args.registry_mode == "query":
            response = registry.client_query(args.host, args.port, Pid(args.pid))
            print(response)
            return EXIT_OK if response == "YES" else EXIT_REJECTED
        if args.registry_mode == "claim":
            response = registry.client_claim(
                args.host,
                args.port,
                Pid(args.contact_pid),
                Pid(args.claimant_pid),
                args.name,
                args.phrase,
            )
            print(response)
            return EXIT_OK if response == "CONFIRMED" else EXIT_REJECTED
        # ingest
        try:
            cert = parse_certificate_text(_read_text(args.cert))
        except ValueError as exc:
            raise InputError(f"bad certificate file: {exc}") from exc
        response = registry.client_ingest(args.host, args.port, cert)
        print(response)
        return EXIT_OK if response == "OK" else EXIT_REJECTED
    except OSError as exc:
        raise InputError(f"cannot reach registry at {args.host}:{args.port}: {exc}") from exc


def cmd_bizlog(args) -> int:
    if args.bizlog_mode == "append":
        try:
            log = _load_chain(args)
        except InputError:
            log = bizlog.VisitorLog(business_id=args.business_id)
        try:
            bizlog.append_visit(log, Pid(args.pid), args.at)
        except (ValueError, bizlog.OutOfOrderVisit) as exc:
            raise InputError(str(exc)) from exc
        bizlog.save_chain(log, args.chain, args.head)
        print(f"appended|{log.chain[-1].seq}")
        return EXIT_OK
    if args.bizlog_mode == "verify":
        check = bizlog.verify_chain(_load_chain(args))
        if check.intact:
            print("INTACT")
            return EXIT_OK
        print(f"TAMPERED-AT {check.tampered_at}")
        return EXIT_REJECTED
    # evidence
    log = _load_chain(args)
    repo = registry.parse_repository(_read_text(args.repo))
    try:
        verdict = bizlog.evidence_query(
            log,
            Pid(args.pid),
            args.window_from,
            args.window_to,
            lambda pid: registry.is_notified_pid(repo, pid),
        )
    except (ValueError, bizlog.InvalidWindow) as exc:
        raise InputError(str(exc)) from exc
    print(verdict.value)
    return EXIT_OK if verdict is bizlog.EvidenceVerdict.VISIT_AND_CERTIFIED else EXIT_REJECTED


def cmd_log(args) -> int:
    log = _load_log(args.log, retention_days=args.retention_days)
    if args.log_mode == "show":
        sys.stdout.write(contactlog.serialize_log(log))
        return EXIT_OK
    if args.log_mode == "prune":
        before = len(log.entries)
        contactlog.prune(log, args.now)
        contactlog.save_log(log, args.log)
        print(f"pruned|{before - len(log.entries)}")
        return EXIT_OK
    # stats
    summary = contactlog.exposure_statistics(log)
    print(f"count|{summary.entry_count}")
    print(f"peers|{summary.distinct_peer_pids}")
    for location, count in summary.location_counts.items():
        print(f"location|{wire.quote(location)}|{count}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backtrack", description="Distributed contact back-tracking toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_pid = sub.add_parser("pid", help="generate pseudo-IDs")
    pid_sub = p_pid.add_subparsers(dest="pid_mode", required=True)
    p_random = pid_sub.add_parser("random")
    p_random.add_argument("--seed", type=int, required=True)
    p_trusted = pid_sub.add_parser("trusted")
    p_trusted.add_argument("--name", required=True)
    p_trusted.add_argument("--phrase", required=True)
    p_trusted.add_argument("--commitment-file")
    p_pid.set_defaults(func=cmd_pid)

    p_sim = sub.add_parser("sim", help="run a simulation scenario")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--trace")
    p_sim.set_defaults(func=cmd_sim)

    p_cert = sub.add_parser("cert", help="lab keys and infection certificates")
    cert_sub = p_cert.add_subparsers(dest="cert_mode", required=True)
    p_keygen = cert_sub.add_parser("keygen")
    p_keygen.add_argument("--lab-id", required=True)
    p_keygen.add_argument("--key-out", required=True)
    p_keygen.add_argument("--directory", required=True)
    p_issue = cert_sub.add_parser("issue")
    p_issue.add_argument("--key", required=True)
    p_issue.add_argument("--pids", required=True)
    p_issue.add_argument("--test-date", required=True)
    p_issue.add_argument("--infectious-from", required=True)
    p_issue.add_argument("--out", required=True)
    p_verify = cert_sub.add_parser("verify")
    p_verify.add_argument("--cert", required=True)
    p_verify.add_argument("--directory", required=True)
    p_cert.set_defaults(func=cmd_cert)

    p_notify = sub.add_parser("notify", help="build and verify notifications")
    notify_sub = p_notify.add_subparsers(dest="notify_mode", required=True)
    p_build = notify_sub.add_parser("build")
    p_build.add_argument("--log", required=True)
    p_build.add_argument("--own-pids", required=True)
    p_build.add_argument("--cert")
    p_build.add_argument("--mailbox-dir", required=True)
    p_nverify = notify_sub.add_parser("verify")
    p_nverify.add_argument("--log", required=True)
    p_nverify.add_argument("--directory", required=True)
    p_nverify.add_argument("--notification", required=True)
    p_nverify.add_argument("--mode", choices=["required", "optional"], default="required")
    p_nverify.add_argument("--tolerance", type=float, default=300.0)
    p_notify.set_defaults(func=cmd_notify)

    p_registry = sub.add_parser("registry", help="notified-PID repository service")
    registry_sub = p_registry.add_subparsers(dest="registry_mode", required=True)
    p_serve = registry_sub.add_parser("serve")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--directory", required=True)
    p_serve.add_argument("--state")
    p_query = registry_sub.add_parser("query")
    p_query.add_argument("--host", default="127.0.0.1")
    p_query.add_argument("--port", type=int, required=True)
    p_query.add_argument("--pid", required=True)
    p_claim = registry_sub.add_parser("claim")
    p_claim.add_argument("--host", default="127.0.0.1")
    p_claim.add_argument("--port", type=int, required=True)
    p_claim.add_argument("--contact-pid", required=True)
    p_claim.add_argument("--claimant-pid", required=True)
    p_claim.add_argument("--name", required=True)
    p_claim.add_argument("--phrase", required=True)
    p_ingest = registry_sub.add_parser("ingest")
    p_ingest.add_argument("--host", default="127.0.0.1")
    p_ingest.add_argument("--port", type=int, required=True)
    p_ingest.add_argument("--cert", required=True)
    p_registry.set_defaults(func=cmd_registry)

    p_bizlog = sub.add_parser("bizlog", help="hash-chained visitor log")
    bizlog_sub = p_bizlog.add_subparsers(dest="bizlog_mode", required=True)
    p_append = bizlog_sub.add_parser("append")
    p_append.add_argument("--chain", required=True)
    p_append.add_argument("--head", required=True)
    p_append.add_argument("--business-id", required=True)
    p_append.add_argument("--pid", required=True)
    p_append.add_argument("--at", type=float, required=True)
    p_bverify = bizlog_sub.add_parser("verify")
    p_bverify.add_argument("--chain", required=True)
    p_bverify.add_argument("--head", required=True)
    p_bverify.add_argument("--business-id", default="business")
    p_evidence = bizlog_sub.add_parser("evidence")
    p_evidence.add_argument("--chain", required=True)
    p_evidence.add_argument("--head", required=True)
    p_evidence.add_argument("--business-id", default="business")
    p_evidence.add_argument("--pid", required=True)
    p_evidence.add_argument("--from", dest="window_from", type=float, required=True)
    p_evidence.add_argument("--to", dest="window_to", type=float, required=True)
    p_evidence.add_argument("--repo", required=True)
    p_bizlog.set_defaults(func=cmd_bizlog)

    p_log = sub.add_parser("log", help="inspect and maintain the contact log")
    log_sub = p_log.add_subparsers(dest="log_mode", required=True)
    for name in ("show", "prune", "stats"):
        p = log_sub.add_parser(name)
        p.add_argument("--log", required=True)
        p.add_argument("--retention-days", type=int, default=21)
        if name == "prune":
            p.add_argument("--now", type=float, required=True)
    p_log.set_defaults(func=cmd_log)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MalformedPad as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
