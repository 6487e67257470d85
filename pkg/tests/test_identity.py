import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from backtrack import identity
from backtrack.identity import (
    EmptyInput,
    IdentityPeriod,
    InvalidWindow,
    MalformedPad,
    Pad,
    Pid,
    active_pids_in_window,
    commitment_to_line,
    generate_random_pid,
    generate_trusted_pid,
    parse_commitment_line,
    prove_pid_ownership,
)


class TestPid:
    def test_rejects_separator(self):
        with pytest.raises(ValueError):
            Pid("abc|def")

    def test_rejects_comma(self):
        with pytest.raises(ValueError):
            Pid("abc,def")

    def test_rejects_whitespace_and_empty(self):
        with pytest.raises(ValueError):
            Pid("ab cd")
        with pytest.raises(ValueError):
            Pid("")
        with pytest.raises(ValueError):
            Pid("x" * 65)

    def test_exact_equality(self):
        assert Pid("abc") == Pid("abc")
        assert Pid("abc") != Pid("abC")

    @given(st.text(min_size=1, max_size=64))
    def test_constructed_pids_never_contain_separator(self, s):
        try:
            pid = Pid(s)
        except ValueError:
            return
        assert "|" not in pid.value and "," not in pid.value


class TestPad:
    def test_valid(self):
        assert Pad("me@example.org").value == "me@example.org"

    @pytest.mark.parametrize("bad", ["nodomain@", "@nolocal", "noat", "a|b@c", "a@b@c"])
    def test_malformed(self, bad):
        with pytest.raises(MalformedPad):
            Pad(bad)


class TestRandomPid:
    def test_deterministic_for_fixed_seed(self):
        assert generate_random_pid(42) == generate_random_pid(42)

    def test_distinct_seeds_distinct_pids(self):
        assert generate_random_pid(42) != generate_random_pid(43)

    def test_format(self):
        pid = generate_random_pid(7)
        assert len(pid.value) == 32
        int(pid.value, 16)

    def test_ten_thousand_distinct(self):
        # 10k draws from a 128-bit space: collision probability < 1e-29
        rng = random.Random(1)
        pids = {generate_random_pid(rng).value for _ in range(10_000)}
        assert len(pids) == 10_000


class TestTrustedPid:
    def test_matches_independent_hash_oracle(self):
        # oracle: sha256 over name + 0x1f + phrase, first 32 hex chars
        expected = hashlib.sha256(b"Ada Lovelace\x1ftea at noon").hexdigest()[:32]
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        assert c.pid.value == expected

    def test_deterministic(self):
        a = generate_trusted_pid("Ada Lovelace", "tea at noon")
        b = generate_trusted_pid("Ada Lovelace", "tea at noon")
        assert a.pid == b.pid

    def test_avalanche_on_distinct_inputs(self):
        a = generate_trusted_pid("Ada Lovelace", "tea at noon")
        b = generate_trusted_pid("Ada Lovelace", "tea at one")
        assert a.pid != b.pid

    def test_empty_inputs_rejected(self):
        with pytest.raises(EmptyInput):
            generate_trusted_pid("", "phrase")
        with pytest.raises(EmptyInput):
            generate_trusted_pid("name", "")

    def test_concatenation_ambiguity_resolved(self):
        a = generate_trusted_pid("ab", "c")
        b = generate_trusted_pid("a", "bc")
        assert a.pid != b.pid


class TestOwnership:
    def test_round_trip(self):
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        assert prove_pid_ownership("Ada Lovelace", "tea at noon", c.pid)

    def test_correct_phrase_wrong_personal_data(self):
        # sharing the phrase alone must not let someone else claim the PID
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        assert not prove_pid_ownership("Charles Babbage", "tea at noon", c.pid)

    def test_random_pid_not_owned(self):
        assert not prove_pid_ownership("Ada Lovelace", "tea at noon", generate_random_pid(5))

    @given(
        st.text(min_size=1, max_size=30),
        st.text(min_size=1, max_size=30),
    )
    def test_commitment_binding(self, data, phrase):
        pid = generate_trusted_pid(data, phrase).pid
        assert prove_pid_ownership(data, phrase, pid)
        assert not prove_pid_ownership(data + "x", phrase, pid)
        assert not prove_pid_ownership(data, phrase + "x", pid)


class TestActivePids:
    def period(self):
        return IdentityPeriod(
            pids=((0.0, Pid("A")), (10 * 86400.0, Pid("B"))),
            pad=Pad("me@box"),
        )

    def test_single_pid_whole_period(self):
        p = IdentityPeriod(pids=((0.0, Pid("A")),), pad=Pad("me@box"))
        assert active_pids_in_window(p, 0, 10**9) == [Pid("A")]

    def test_overlap_returns_both(self):
        p = self.period()
        assert active_pids_in_window(p, 5 * 86400.0, 15 * 86400.0) == [Pid("A"), Pid("B")]

    def test_window_before_first_activation(self):
        p = IdentityPeriod(pids=((100.0, Pid("A")),), pad=Pad("me@box"))
        assert active_pids_in_window(p, 0, 50) == []

    def test_invalid_window(self):
        with pytest.raises(InvalidWindow):
            active_pids_in_window(self.period(), 10, 5)

    def test_activation_order_enforced(self):
        with pytest.raises(ValueError):
            IdentityPeriod(pids=((5.0, Pid("A")), (5.0, Pid("B"))), pad=Pad("me@box"))

    def test_brute_force_intersection(self):
        # oracle: per-day membership against explicit activation intervals
        p = self.period()
        for day in range(0, 25):
            lo, hi = day * 86400.0, (day + 1) * 86400.0 - 1
            expected = []
            if lo < 10 * 86400.0:
                expected.append(Pid("A"))
            if hi >= 10 * 86400.0:
                expected.append(Pid("B"))
            assert active_pids_in_window(p, lo, hi) == expected


class TestCommitmentFile:
    def test_round_trip_never_persists_phrase(self):
        c = generate_trusted_pid("Ada Lovelace", "tea at noon")
        line = commitment_to_line(c)
        assert "tea" not in line
        pid, personal = parse_commitment_line(line)
        assert pid == c.pid
        assert personal == "Ada Lovelace"

    def test_personal_data_with_separator_chars(self):
        c = generate_trusted_pid("we|weird%name", "s3cret")
        pid, personal = parse_commitment_line(commitment_to_line(c))
        assert personal == "we|weird%name"
        assert pid == c.pid
