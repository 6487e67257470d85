"""Deterministic agent-based simulator driving the full protocol.

Random-waypoint mobility, log-distance RF channel, beacon exchange feeding
each device's session table, a transparent ground-truth exposure rule for
infection dynamics and metrics, diagnosis events that issue certificates and
post notifications, per-step mailbox polling with verification, and forgery
injection. A fixed seed reproduces metrics and trace bit-for-bit.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone

from . import wire
from .certificates import LabDirectory, LabIdentity, issue_certificate
from .contactlog import ContactLog, LogEntry, append_entry
from .encounter import (
    ChannelModel,
    ContactSession,
    InformationRecord,
    RssiSample,
    SessionTable,
    SignificancePolicy,
    classify_contact,
    close_expired_sessions,
    distance_to_rssi,
    ingest_beacon,
)
from .identity import Pad, Pid, generate_random_pid
from .notify import (
    DeploymentMode,
    MailboxStore,
    Notification,
    build_notifications,
    verify_notification,
)
from .registry import NotifiedPidRepository, ingest_certificate

RADIO_CUTOFF_DBM = -100.0
LOCATION_BUCKET_S = 600.0


class InvalidScenario(ValueError):
    pass


class Health(enum.Enum):
    SUSCEPTIBLE = "S"
    INFECTIOUS = "I"
    DIAGNOSED = "D"


class ForgeryKind(enum.Enum):
    FAKE_CONTACT_CLAIM = "FakeContactClaim"
    PID_SWAP = "PidSwap"
    BOGUS_CERTIFICATE = "BogusCertificate"


@dataclass
class Scenario:
    n_agents: int
    duration_s: float
    world_size_m: tuple[float, float] = (100.0, 100.0)
    initial_infectious: int = 1
    speed_min_mps: float = 0.5
    speed_max_mps: float = 1.5
    pause_min_s: float = 0.0
    pause_max_s: float = 30.0
    beacon_interval_s: int = 10
    channel: ChannelModel = field(default_factory=ChannelModel)
    body_block_prob: float = 0.0
    true_radius_m: float = 3.0
    exposure_seconds: float = 600.0
    transmission_prob: float = 0.0
    diagnosis_delay_s: float = 1200.0
    rng_seed: int = 0
    mode: DeploymentMode = DeploymentMode.CERTIFICATE_REQUIRED
    policies: dict[int, SignificancePolicy] = field(default_factory=dict)
    default_policy_version: int | None = None
    agent_policy: dict[int, int] = field(default_factory=dict)
    positions: dict[int, tuple[float, float]] = field(default_factory=dict)
    pid_rotation_at_s: float | None = None
    retention_days: int = 21
    gap_timeout_s: float = 60.0
    time_tolerance_s: float = 300.0
    forge_fake_claims: int = 0
    forge_pid_swap: int = 0
    forge_bogus_cert: int = 0

    def __post_init__(self) -> None:
        if not self.policies:
            self.policies = {1: SignificancePolicy(1, 3.0, 600.0)}
        if self.default_policy_version is None:
            self.default_policy_version = min(self.policies)
        self.validate()

    def validate(self) -> None:
        if self.n_agents < 1:
            raise InvalidScenario("n_agents must be >= 1")
        if not 0 <= self.initial_infectious <= self.n_agents:
            raise InvalidScenario("initial_infectious out of range")
        if self.duration_s <= 0:
            raise InvalidScenario("duration_s must be > 0")
        if self.true_radius_m <= 0:
            raise InvalidScenario("true_radius_m must be > 0")
        if self.beacon_interval_s < 1:
            raise InvalidScenario("beacon_interval_s must be >= 1 second")
        if self.speed_min_mps < 0 or self.speed_max_mps < self.speed_min_mps:
            raise InvalidScenario("bad speed range")
        if self.pause_min_s < 0 or self.pause_max_s < self.pause_min_s:
            raise InvalidScenario("bad pause range")
        if not 0.0 <= self.transmission_prob <= 1.0:
            raise InvalidScenario("transmission_prob must be in [0, 1]")
        if self.default_policy_version not in self.policies:
            raise InvalidScenario("default policy version not declared")
        for agent_id, version in self.agent_policy.items():
            if version not in self.policies:
                raise InvalidScenario(f"agent {agent_id} assigned undeclared policy {version}")
        w, h = self.world_size_m
        if w <= 0 or h <= 0:
            raise InvalidScenario("world size must be positive")
        for agent_id, (x, y) in self.positions.items():
            if not (0 <= agent_id < self.n_agents):
                raise InvalidScenario(f"position for unknown agent {agent_id}")
            if not (0 <= x <= w and 0 <= y <= h):
                raise InvalidScenario(f"agent {agent_id} position outside world")


def parse_scenario(text: str) -> Scenario:
    """Parse the flat `key = value` scenario format."""
    kv: dict[str, str] = {}
    policies: dict[int, SignificancePolicy] = {}
    agent_policy: dict[int, int] = {}
    positions: dict[int, tuple[float, float]] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidScenario(f"expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key == "policy":
                version_s, max_s, min_s = value.split(":")
                p = SignificancePolicy(int(version_s), float(max_s), float(min_s))
                policies[p.version] = p
            elif key == "agent_policy":
                agent_s, version_s = value.split(":")
                agent_policy[int(agent_s)] = int(version_s)
            elif key == "position":
                agent_s, x_s, y_s = value.split(":")
                positions[int(agent_s)] = (float(x_s), float(y_s))
            else:
                kv[key] = value
        except (ValueError, TypeError) as exc:
            raise InvalidScenario(f"bad value for {key}: {value!r}") from exc

    def take(key: str, conv, default):
        if key in kv:
            return conv(kv.pop(key))
        return default

    try:
        channel = ChannelModel(
            ref_power_dbm=take("ref_power_dbm", float, -59.0),
            path_loss_exponent=take("path_loss_exponent", float, 2.0),
            shadowing_sigma_db=take("shadowing_sigma_db", float, 0.0),
            body_shadow_db=take("body_shadow_db", float, 0.0),
        )
        mode_s = take("mode", str, "required")
        if mode_s not in ("required", "optional"):
            raise InvalidScenario(f"mode must be required|optional, got {mode_s!r}")
        scenario = Scenario(
            n_agents=take("n_agents", int, 0),
            duration_s=take("duration_s", float, 0.0),
            world_size_m=(
                take("world_width_m", float, 100.0),
                take("world_height_m", float, 100.0),
            ),
            initial_infectious=take("initial_infectious", int, 1),
            speed_min_mps=take("speed_min_mps", float, 0.5),
            speed_max_mps=take("speed_max_mps", float, 1.5),
            pause_min_s=take("pause_min_s", float, 0.0),
            pause_max_s=take("pause_max_s", float, 30.0),
            beacon_interval_s=take("beacon_interval_s", int, 10),
            channel=channel,
            body_block_prob=take("body_block_prob", float, 0.0),
            true_radius_m=take("true_radius_m", float, 3.0),
            exposure_seconds=take("exposure_seconds", float, 600.0),
            transmission_prob=take("transmission_prob", float, 0.0),
            diagnosis_delay_s=take("diagnosis_delay_s", float, 1200.0),
            rng_seed=take("rng_seed", int, 0),
            mode=(
                DeploymentMode.CERTIFICATE_REQUIRED
                if mode_s == "required"
                else DeploymentMode.CERTIFICATE_OPTIONAL
            ),
            policies=policies,
            default_policy_version=take("default_policy_version", int, None),
            agent_policy=agent_policy,
            positions=positions,
            pid_rotation_at_s=take("pid_rotation_at_s", float, None),
            retention_days=take("retention_days", int, 21),
            gap_timeout_s=take("gap_timeout_s", float, 60.0),
            time_tolerance_s=take("time_tolerance_s", float, 300.0),
            forge_fake_claims=take("forge_fake_claims", int, 0),
            forge_pid_swap=take("forge_pid_swap", int, 0),
            forge_bogus_cert=take("forge_bogus_cert", int, 0),
        )
    except InvalidScenario:
        raise
    except (ValueError, TypeError) as exc:
        raise InvalidScenario(str(exc)) from exc
    if kv:
        raise InvalidScenario(f"unknown scenario keys: {sorted(kv)}")
    return scenario


@dataclass
class SimMetrics:
    true_exposures: int = 0
    notified_true: int = 0
    notified_false: int = 0
    missed: int = 0
    rejected_forgeries: int = 0
    forgeries_accepted: int = 0
    forgeries_injected: int = 0
    notifications_built: int = 0
    pending_at_end: int = 0
    infections: int = 0
    diagnoses: int = 0
    verdict_counts: dict[str, int] = field(default_factory=dict)


def metrics_to_lines(m: SimMetrics) -> str:
    fields = [
        ("true_exposures", m.true_exposures),
        ("notified_true", m.notified_true),
        ("notified_false", m.notified_false),
        ("missed", m.missed),
        ("rejected_forgeries", m.rejected_forgeries),
        ("forgeries_accepted", m.forgeries_accepted),
        ("forgeries_injected", m.forgeries_injected),
        ("notifications_built", m.notifications_built),
        ("pending_at_end", m.pending_at_end),
        ("infections", m.infections),
        ("diagnoses", m.diagnoses),
    ]
    lines = [f"metric|{name}|{value}" for name, value in fields]
    for status in sorted(m.verdict_counts):
        lines.append(f"metric|verdict_{status}|{m.verdict_counts[status]}")
    return "".join(line + "\n" for line in lines)


@dataclass
class Agent:
    agent_id: int
    pad: Pad
    pid: Pid
    pids_used: list[tuple[float, Pid]]
    policy: SignificancePolicy
    position: tuple[float, float]
    health: Health = Health.SUSCEPTIBLE
    infected_at: float | None = None
    diagnose_at: float | None = None
    waypoint: tuple[float, float] | None = None
    speed: float = 0.0
    pause_until: float = 0.0
    sessions: SessionTable = field(default_factory=dict)
    log: ContactLog = field(default_factory=ContactLog)
    verdicts: list = field(default_factory=list)


@dataclass
class _PairState:
    prev_in_radius: bool = False
    dwell: float = 0.0
    qualified: bool = False


class World:
    """Mutable simulation state; step() advances time by 1 s."""

    DT = 1.0

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.now = 0.0
        self.metrics = SimMetrics()
        self.trace: list[str] = []
        master = random.Random(scenario.rng_seed)
        self._mobility_rng = random.Random(master.getrandbits(64))
        self._channel_rng = random.Random(master.getrandbits(64))
        self._infect_rng = random.Random(master.getrandbits(64))
        self._forgery_rng = random.Random(master.getrandbits(64))
        pid_rng = random.Random(master.getrandbits(64))

        self.lab = LabIdentity.from_seed(
            "sim-lab", random.Random(master.getrandbits(64)).randbytes(32)
        )
        self.directory = LabDirectory()
        self.directory.add_lab(self.lab)
        self.repo = NotifiedPidRepository()
        self.mailboxes = MailboxStore()

        self.agents: list[Agent] = []
        for i in range(scenario.n_agents):
            pid = generate_random_pid(pid_rng)
            position = scenario.positions.get(i)
            if position is None:
                position = (
                    self._mobility_rng.uniform(0, scenario.world_size_m[0]),
                    self._mobility_rng.uniform(0, scenario.world_size_m[1]),
                )
            version = scenario.agent_policy.get(i, scenario.default_policy_version)
            agent = Agent(
                agent_id=i,
                pad=Pad(f"agent-{i}@sim"),
                pid=pid,
                pids_used=[(0.0, pid)],
                policy=scenario.policies[version],
                position=position,
            )
            if i < scenario.initial_infectious:
                agent.health = Health.INFECTIOUS
                agent.infected_at = 0.0
                agent.diagnose_at = scenario.diagnosis_delay_s
            self.agents.append(agent)

        self._pair_state: dict[tuple[int, int], _PairState] = {}
        self._true_pairs: set[tuple[int, int]] = set()
        self._accepted_pairs: set[tuple[int, int]] = set()
        self._built: list[tuple[Pad, Notification, int]] = []
        # FIFO per mailbox, parallel to delivery order: source agent id for
        # genuine notifications, None for injected forgeries
        self._delivery_tags: dict[str, list[int | None]] = {}
        self._had_diagnosis = False
        self._forgeries_pending = (
            scenario.forge_fake_claims > 0
            or scenario.forge_pid_swap > 0
            or scenario.forge_bogus_cert > 0
        )
        self._rotated = False

    # -- helpers -----------------------------------------------------------

    def _emit(self, event: str) -> None:
        self.trace.append(f"trace|{wire.fmt_num(self.now)}|{event}")

    def _location_label(self, agent: Agent) -> str:
        bucket = int(self.now // LOCATION_BUCKET_S)
        return f"loc-{agent.agent_id}-{bucket}"

    def _own_record(self, agent: Agent) -> InformationRecord:
        return InformationRecord(
            pid=agent.pid,
            pad=agent.pad,
            local_time=self.now,
            local_location=self._location_label(agent),
        )

    def _classify_and_log(self, agent: Agent, session: ContactSession) -> None:
        verdict = classify_contact(session, agent.policy, self.scenario.channel)
        if not verdict.significant:
            return  # non-significant data are discarded
        entry = LogEntry(
            own_record=session.own_record,
            peer_record=session.peer_record,
            recorded_at=self.now,
            dwell_s=verdict.dwell_s,
            policy_version=agent.policy.version,
        )
        append_entry(agent.log, entry)
        self._emit(
            f"log-entry|{agent.agent_id}|peer={session.peer_record.pid.value}"
            f"|dwell={wire.fmt_num(verdict.dwell_s)}"
        )

    def _flush_session(self, agent: Agent, peer_pid: Pid) -> None:
        """Close and classify any open session with a peer PID (used before
        verifying a notification naming that PID)."""
        session = agent.sessions.pop(peer_pid.value, None)
        if session is not None:
            self._classify_and_log(agent, session)

    # -- per-step phases ---------------------------------------------------

    def _move(self) -> None:
        s = self.scenario
        if s.speed_max_mps == 0:
            return
        for agent in self.agents:
            if self.now < agent.pause_until:
                continue
            if agent.waypoint is None:
                agent.waypoint = (
                    self._mobility_rng.uniform(0, s.world_size_m[0]),
                    self._mobility_rng.uniform(0, s.world_size_m[1]),
                )
                agent.speed = self._mobility_rng.uniform(s.speed_min_mps, s.speed_max_mps)
            dx = agent.waypoint[0] - agent.position[0]
            dy = agent.waypoint[1] - agent.position[1]
            dist = math.hypot(dx, dy)
            step = agent.speed * self.DT
            if dist <= step or agent.speed == 0:
                agent.position = agent.waypoint
                agent.waypoint = None
                agent.pause_until = self.now + self._mobility_rng.uniform(
                    s.pause_min_s, s.pause_max_s
                )
            else:
                agent.position = (
                    agent.position[0] + dx / dist * step,
                    agent.position[1] + dy / dist * step,
                )

    def _beacon_tick(self) -> None:
        s = self.scenario
        active = [a for a in self.agents if a.health is not Health.DIAGNOSED]
        records = {a.agent_id: self._own_record(a) for a in active}
        for idx, a in enumerate(active):
            for b in active[idx + 1 :]:
                true_d = max(
                    0.01,
                    math.hypot(
                        a.position[0] - b.position[0], a.position[1] - b.position[1]
                    ),
                )
                noise = (
                    self._channel_rng.gauss(0.0, 1.0)
                    if s.channel.shadowing_sigma_db > 0
                    else 0.0
                )
                blocked = (
                    s.body_block_prob > 0
                    and self._channel_rng.random() < s.body_block_prob
                )
                rssi = distance_to_rssi(true_d, s.channel, noise, blocked)
                if rssi >= RADIO_CUTOFF_DBM:
                    rssi = min(rssi, 0.0)
                    sample = RssiSample(at=self.now, rssi_dbm=rssi)
                    for receiver, sender in ((a, b), (b, a)):
                        closed = ingest_beacon(
                            receiver.sessions,
                            own=records[receiver.agent_id],
                            peer=records[sender.agent_id],
                            sample=sample,
                            gap_timeout_s=s.gap_timeout_s,
                        )
                        if closed is not None:
                            self._classify_and_log(receiver, closed)
                self._ground_truth_update(a, b, true_d)

    def _ground_truth_update(self, a: Agent, b: Agent, true_d: float) -> None:
        s = self.scenario
        key = (a.agent_id, b.agent_id)
        state = self._pair_state.setdefault(key, _PairState())
        in_radius = true_d <= s.true_radius_m
        if in_radius and state.prev_in_radius:
            state.dwell += s.beacon_interval_s
        elif in_radius:
            state.dwell = 0.0
        else:
            state.dwell = 0.0
            state.qualified = False
        state.prev_in_radius = in_radius
        if in_radius and not state.qualified and state.dwell >= s.exposure_seconds:
            state.qualified = True
            for src, dst in ((a, b), (b, a)):
                if src.health is Health.INFECTIOUS:
                    if (src.agent_id, dst.agent_id) not in self._true_pairs:
                        self._true_pairs.add((src.agent_id, dst.agent_id))
                        self._emit(f"exposure|{src.agent_id}|{dst.agent_id}")
                    if (
                        dst.health is Health.SUSCEPTIBLE
                        and self._infect_rng.random() < s.transmission_prob
                    ):
                        dst.health = Health.INFECTIOUS
                        dst.infected_at = self.now
                        dst.diagnose_at = self.now + s.diagnosis_delay_s
                        self.metrics.infections += 1
                        self._emit(f"infect|{dst.agent_id}")

    def _rotate_pids(self) -> None:
        pid_rng = random.Random(self.scenario.rng_seed ^ 0x9E3779B9)
        for agent in self.agents:
            if agent.health is Health.DIAGNOSED:
                continue
            new_pid = generate_random_pid(pid_rng)
            agent.pid = new_pid
            agent.pids_used.append((self.now, new_pid))
            self._emit(f"pid-rotation|{agent.agent_id}")

    def _diagnose_due(self) -> None:
        for agent in self.agents:
            if agent.health is Health.INFECTIOUS and agent.diagnose_at is not None:
                if agent.diagnose_at <= self.now:
                    self._diagnose(agent)

    def _diagnose(self, agent: Agent) -> None:
        for key in sorted(agent.sessions):
            self._classify_and_log(agent, agent.sessions.pop(key))
        own_pids = [pid for _, pid in agent.pids_used]
        cert = None
        if self.scenario.mode is DeploymentMode.CERTIFICATE_REQUIRED:
            cert = issue_certificate(
                self.lab,
                own_pids,
                test_date=_utc_date(self.now),
                infectious_from=_utc_date(agent.infected_at or 0.0),
            )
            ingest_certificate(self.repo, cert, self.directory)
        notifications = build_notifications(agent.log, own_pids, cert)
        for pad, n in notifications:
            self._built.append((pad, n, agent.agent_id))
            self._deliver(pad, n, source_id=agent.agent_id)
        self.metrics.notifications_built += len(notifications)
        agent.health = Health.DIAGNOSED
        self.metrics.diagnoses += 1
        self._had_diagnosis = True
        self._emit(f"diagnose|{agent.agent_id}|notifications={len(notifications)}")

    def _deliver(self, pad: Pad, n: Notification, source_id: int | None) -> None:
        self.mailboxes.deliver(pad, n)
        self._delivery_tags.setdefault(pad.value, []).append(source_id)

    def _poll_and_verify(self) -> None:
        for agent in self.agents:
            messages = self.mailboxes.poll(agent.pad)
            if not messages:
                continue
            tags = self._delivery_tags.pop(agent.pad.value, [])
            for n, source_id in zip(messages, tags, strict=True):
                self._flush_session(agent, n.sender_pid)
                verdict = verify_notification(
                    n,
                    agent.log,
                    self.directory,
                    mode=self.scenario.mode,
                    time_tolerance_s=self.scenario.time_tolerance_s,
                )
                agent.verdicts.append(verdict)
                counts = self.metrics.verdict_counts
                counts[verdict.status.value] = counts.get(verdict.status.value, 0) + 1
                forged = source_id is None
                if forged:
                    if verdict.accepted:
                        self.metrics.forgeries_accepted += 1
                    else:
                        self.metrics.rejected_forgeries += 1
                elif verdict.accepted:
                    self._accepted_pairs.add((source_id, agent.agent_id))
                self._emit(
                    f"verdict|{agent.agent_id}|{verdict.status.value}|forged={int(forged)}"
                )

    # -- forgery injection ---------------------------------------------------

    def inject_forgeries(self, kind: ForgeryKind, count: int) -> int:
        """Craft and deliver `count` attack notifications; returns how many
        were actually injected (PidSwap needs genuine material to copy)."""
        rng = self._forgery_rng
        injected = 0
        for _ in range(count):
            if kind is ForgeryKind.FAKE_CONTACT_CLAIM:
                victim = rng.choice(self.agents)
                n = Notification(
                    sender_pid=generate_random_pid(rng),
                    echoed_time=rng.uniform(0, self.scenario.duration_s),
                    echoed_location=f"loc-{rng.randrange(self.scenario.n_agents)}"
                    f"-{rng.randrange(12)}",
                    certificate=None,
                )
            elif kind is ForgeryKind.PID_SWAP:
                if not self._built:
                    break
                pad, original, source_id = rng.choice(self._built)
                attacker = rng.choice(
                    [a for a in self.agents if a.agent_id != source_id]
                )
                n = replace(original, sender_pid=attacker.pid)
                victim = next(a for a in self.agents if a.pad == pad)
            else:  # BogusCertificate
                attacker = rng.choice(self.agents)
                fake_lab = LabIdentity.from_seed("fake-lab", rng.randbytes(32))
                fake_cert = issue_certificate(
                    fake_lab,
                    [pid for _, pid in attacker.pids_used],
                    test_date=_utc_date(self.now),
                    infectious_from=_utc_date(0.0),
                )
                if attacker.log.entries:
                    entry = rng.choice(attacker.log.entries)
                    n = Notification(
                        sender_pid=entry.own_record.pid,
                        echoed_time=entry.peer_record.local_time,
                        echoed_location=entry.peer_record.local_location,
                        certificate=fake_cert,
                    )
                    victim = next(
                        a for a in self.agents if a.pad == entry.peer_record.pad
                    )
                else:
                    victim = rng.choice(self.agents)
                    n = Notification(
                        sender_pid=attacker.pid,
                        echoed_time=rng.uniform(0, self.scenario.duration_s),
                        echoed_location=f"loc-{victim.agent_id}-0",
                        certificate=fake_cert,
                    )
            self._deliver(victim.pad, n, source_id=None)
            injected += 1
            self._emit(f"forgery|{kind.value}|target={victim.agent_id}")
        self.metrics.forgeries_injected += injected
        return injected

    def _inject_scheduled_forgeries(self) -> None:
        s = self.scenario
        if s.forge_fake_claims:
            self.inject_forgeries(ForgeryKind.FAKE_CONTACT_CLAIM, s.forge_fake_claims)
        if s.forge_pid_swap:
            self.inject_forgeries(ForgeryKind.PID_SWAP, s.forge_pid_swap)
        if s.forge_bogus_cert:
            self.inject_forgeries(ForgeryKind.BOGUS_CERTIFICATE, s.forge_bogus_cert)
        self._forgeries_pending = False

    # -- driving -------------------------------------------------------------

    def step(self) -> None:
        s = self.scenario
        self._move()
        if (
            s.pid_rotation_at_s is not None
            and not self._rotated
            and self.now >= s.pid_rotation_at_s
        ):
            self._rotate_pids()
            self._rotated = True
        if int(self.now) % s.beacon_interval_s == 0:
            self._beacon_tick()
        for agent in self.agents:
            for closed in close_expired_sessions(agent.sessions, self.now, s.gap_timeout_s):
                self._classify_and_log(agent, closed)
        self._diagnose_due()
        if self._forgeries_pending and self._had_diagnosis:
            self._inject_scheduled_forgeries()
        self._poll_and_verify()
        self.now += self.DT

    def finalize(self) -> SimMetrics:
        """Close remaining sessions, settle metrics against ground truth."""
        for agent in self.agents:
            for key in sorted(agent.sessions):
                self._classify_and_log(agent, agent.sessions.pop(key))
        m = self.metrics
        m.true_exposures = len(self._true_pairs)
        m.notified_true = len(self._true_pairs & self._accepted_pairs)
        m.notified_false = len(self._accepted_pairs - self._true_pairs)
        m.missed = len(self._true_pairs - self._accepted_pairs)
        m.pending_at_end = self.mailboxes.pending_count()
        return m

    def run(self) -> SimMetrics:
        while self.now < self.scenario.duration_s:
            self.step()
        return self.finalize()


def _utc_date(timestamp: float) -> date:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).date()


def run_scenario(scenario: Scenario) -> tuple[SimMetrics, list[str]]:
    """Run a scenario to completion; returns (metrics, trace lines)."""
    world = World(scenario)
    metrics = world.run()
    return metrics, world.trace
