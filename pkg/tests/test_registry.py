import threading
from dataclasses import replace
from datetime import date

import pytest

from backtrack.certificates import issue_certificate
from backtrack.identity import Pid, generate_trusted_pid
from backtrack.registry import (
    ClaimVerdict,
    NotifiedPidRepository,
    RegistryService,
    RejectedCertificate,
    check_test_priority_claim,
    client_claim,
    client_ingest,
    client_query,
    ingest_certificate,
    is_notified_pid,
    load_repository,
    parse_repository,
    repository_to_lines,
    serve,
)


def cert_for(lab, pids, test_date=date(2020, 4, 1)):
    return issue_certificate(lab, pids, test_date, date(2020, 3, 25))


class TestIngest:
    def test_verified_cert_pids_queryable(self, lab, directory):
        repo = NotifiedPidRepository()
        ingest_certificate(repo, cert_for(lab, [Pid("P1"), Pid("P2")]), directory)
        assert is_notified_pid(repo, Pid("P1"))
        assert is_notified_pid(repo, Pid("P2"))

    def test_tampered_cert_rejected_repo_unchanged(self, lab, directory):
        repo = NotifiedPidRepository()
        cert = cert_for(lab, [Pid("P1")])
        tampered = replace(cert, pids=(Pid("P9"),))
        with pytest.raises(RejectedCertificate):
            ingest_certificate(repo, tampered, directory)
        assert repo.entries == {}

    def test_earliest_test_date_wins_both_orders(self, lab, directory):
        early = cert_for(lab, [Pid("P1")], test_date=date(2020, 3, 30))
        late = cert_for(lab, [Pid("P1")], test_date=date(2020, 4, 5))
        for order in ((early, late), (late, early)):
            repo = NotifiedPidRepository()
            for c in order:
                ingest_certificate(repo, c, directory)
            assert repo.entries["P1"][1] == date(2020, 3, 30)

    def test_idempotent_per_certificate(self, lab, directory):
        cert = cert_for(lab, [Pid("P1"), Pid("P2")])
        repo = NotifiedPidRepository()
        ingest_certificate(repo, cert, directory)
        snapshot = dict(repo.entries)
        ingest_certificate(repo, cert, directory)
        assert repo.entries == snapshot


class TestMembership:
    def test_never_ingested_false(self):
        assert not is_notified_pid(NotifiedPidRepository(), Pid("nope"))

    def test_one_character_difference(self, lab, directory):
        repo = NotifiedPidRepository()
        ingest_certificate(repo, cert_for(lab, [Pid("abcd")]), directory)
        assert not is_notified_pid(repo, Pid("abce"))


class TestClaims:
    def setup_repo(self, lab, directory):
        repo = NotifiedPidRepository()
        ingest_certificate(repo, cert_for(lab, [Pid("sickpid")]), directory)
        return repo

    def test_confirmed(self, lab, directory):
        repo = self.setup_repo(lab, directory)
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        verdict = check_test_priority_claim(repo, Pid("sickpid"), c.personal_data, c.phrase, c.pid)
        assert verdict is ClaimVerdict.CONTACT_CONFIRMED

    def test_unknown_contact_pid(self, lab, directory):
        repo = self.setup_repo(lab, directory)
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        verdict = check_test_priority_claim(repo, Pid("healthy"), c.personal_data, c.phrase, c.pid)
        assert verdict is ClaimVerdict.CONTACT_PID_UNKNOWN

    def test_wrong_phrase(self, lab, directory):
        repo = self.setup_repo(lab, directory)
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        verdict = check_test_priority_claim(repo, Pid("sickpid"), c.personal_data, "wrong", c.pid)
        assert verdict is ClaimVerdict.OWNERSHIP_FAILED


class TestPersistence:
    def test_round_trip(self, lab, directory):
        repo = NotifiedPidRepository()
        ingest_certificate(repo, cert_for(lab, [Pid("P1"), Pid("P2")]), directory)
        text = repository_to_lines(repo)
        assert parse_repository(text).entries == repo.entries

    def test_replay_keeps_earliest(self):
        text = (
            "notified|P1|lab-A|2020-04-05\n"
            "notified|P1|lab-B|2020-03-30\n"
        )
        repo = parse_repository(text)
        assert repo.entries["P1"][1] == date(2020, 3, 30)

    def test_missing_file_is_empty_repo(self, tmp_path):
        repo = load_repository(str(tmp_path / "absent.txt"))
        assert repo.entries == {}


class TestWireProtocol:
    def service(self, lab, directory, persist=None):
        return RegistryService(NotifiedPidRepository(), directory, persist)

    def test_ingest_then_query(self, lab, directory):
        from backtrack.certificates import certificate_to_lines

        svc = self.service(lab, directory)
        cert_lines = certificate_to_lines(cert_for(lab, [Pid("P1")])).splitlines()
        assert svc.handle_request(["INGEST", *cert_lines]) == "OK"
        assert svc.handle_request(["QUERY P1"]) == "YES"
        assert svc.handle_request(["QUERY P2"]) == "NO"

    def test_ingest_garbage_rejected(self, lab, directory):
        svc = self.service(lab, directory)
        assert svc.handle_request(["INGEST", "not-a-cert", "nope"]) == "REJECTED"

    def test_claim_responses(self, lab, directory):
        from backtrack.certificates import certificate_to_lines
        from backtrack import wire

        svc = self.service(lab, directory)
        cert_lines = certificate_to_lines(cert_for(lab, [Pid("sickpid")])).splitlines()
        svc.handle_request(["INGEST", *cert_lines])
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        name, phrase = wire.quote(c.personal_data), wire.quote(c.phrase)
        assert svc.handle_request([f"CLAIM sickpid {c.pid.value} {name} {phrase}"]) == "CONFIRMED"
        assert svc.handle_request([f"CLAIM healthy {c.pid.value} {name} {phrase}"]) == "UNKNOWN"
        assert svc.handle_request([f"CLAIM sickpid {c.pid.value} {name} wrong"]) == "OWNERSHIP-FAILED"

    def test_malformed_request(self, lab, directory):
        svc = self.service(lab, directory)
        assert svc.handle_request(["HELLO"]).startswith("ERROR")

    def test_persistence_appended_on_ingest(self, lab, directory, tmp_path):
        from backtrack.certificates import certificate_to_lines

        path = str(tmp_path / "state.txt")
        svc = self.service(lab, directory, persist=path)
        cert_lines = certificate_to_lines(cert_for(lab, [Pid("P1")])).splitlines()
        svc.handle_request(["INGEST", *cert_lines])
        replayed = load_repository(path)
        assert is_notified_pid(replayed, Pid("P1"))


class TestServer:
    def test_end_to_end_over_tcp(self, lab, directory, tmp_path):
        server = serve("127.0.0.1", 0, directory, str(tmp_path / "state.txt"))
        host, port = server.server_address
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            cert = cert_for(lab, [Pid("sickpid")])
            assert client_ingest(host, port, cert) == "OK"
            assert client_query(host, port, Pid("sickpid")) == "YES"
            assert client_query(host, port, Pid("other")) == "NO"
            c = generate_trusted_pid("Ada Lovelace", "tea at noon")
            assert client_claim(host, port, Pid("sickpid"), c.pid,
                                c.personal_data, c.phrase) == "CONFIRMED"
            assert client_claim(host, port, Pid("sickpid"), c.pid,
                                c.personal_data, "wrong") == "OWNERSHIP-FAILED"
        finally:
            server.shutdown()
            server.server_close()

    def test_restart_replays_state(self, lab, directory, tmp_path):
        state = str(tmp_path / "state.txt")
        server = serve("127.0.0.1", 0, directory, state)
        host, port = server.server_address
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        client_ingest(host, port, cert_for(lab, [Pid("P1")]))
        server.shutdown()
        server.server_close()

        server2 = serve("127.0.0.1", 0, directory, state)
        host2, port2 = server2.server_address
        thread2 = threading.Thread(target=server2.serve_forever, daemon=True)
        thread2.start()
        try:
            assert client_query(host2, port2, Pid("P1")) == "YES"
        finally:
            server2.shutdown()
            server2.server_close()
