"""Deterministic seeded discrete-event simulator for replication clusters.

Events are processed in (time, seq) order from a single heap; all
randomness comes from named streams derived from the run seed, one per
(node-pair or node, purpose), so identical inputs produce byte-identical
traces.  Network behavior is scripted through delay models, per-node
service times derived from a heterogeneity profile, crash plans resolved
against live weight assignments, and per-round load changes.
"""
from __future__ import annotations

import bisect
import hashlib
import heapq
import random
from dataclasses import dataclass, field, replace

from .consensus import (
    Algo,
    AppendEntriesMsg,
    AppendReply,
    ClusterConfig,
    Node,
    Role,
    VoteReply,
    VoteRequest,
)
from .trace import ExecutionTrace, RoundStats, TraceRecord
from .workload import OperationMix, batch_cost, generate_batch

__all__ = [
    "CrashPlan",
    "DelayModel",
    "HeterogeneityProfile",
    "LivelockError",
    "LoadChange",
    "Recovery",
    "Simulation",
    "sample_delay",
    "suggest_election_timeouts",
]


class LivelockError(RuntimeError):
    """No commit happened within the simulated-time cap."""

    def __init__(self, message: str, trace: ExecutionTrace | None = None):
        super().__init__(message)
        self.trace = trace


# --------------------------------------------------------------------- delays


@dataclass
class DelayModel:
    """Scripted one-way message delays, all parameters in simulated ms.

    kinds:
      none     -- zero delay everywhere
      uniform  -- one mean +/- half_width band for every link
      skew     -- per-link mean declining linearly across node ids; a link
                  is keyed by its higher-id endpoint so the (low-id) leader
                  does not dominate every round trip
      dynamic  -- the skew pattern rotated one position at every regime
                  change (the simulator fires one every rotate_every_rounds)
      burst    -- delay spikes: each cycle starts with on_ms of spiking
                  followed by off_ms of zero delay
    """

    kind: str = "none"
    mean: float = 0.0
    half_width: float = 0.0
    hi_mean: float = 1000.0
    lo_mean: float = 100.0
    hw_frac: float = 0.2
    rotate_every_rounds: int = 10
    spike_mean: float = 1000.0
    spike_half_width: float = 100.0
    on_ms: float = 5000.0
    off_ms: float = 10000.0
    n: int = 0
    shift_times: list[float] = field(default_factory=list)

    @classmethod
    def none(cls) -> "DelayModel":
        return cls(kind="none")

    @classmethod
    def uniform(cls, mean: float, half_width: float | None = None) -> "DelayModel":
        if half_width is None:
            half_width = 0.2 * mean
        return cls(kind="uniform", mean=mean, half_width=half_width)

    @classmethod
    def skew(cls, hi_mean: float = 1000.0, lo_mean: float = 100.0, hw_frac: float = 0.2) -> "DelayModel":
        return cls(kind="skew", hi_mean=hi_mean, lo_mean=lo_mean, hw_frac=hw_frac)

    @classmethod
    def dynamic(cls, hi_mean: float = 1000.0, lo_mean: float = 100.0, hw_frac: float = 0.2,
                rotate_every_rounds: int = 10) -> "DelayModel":
        return cls(kind="dynamic", hi_mean=hi_mean, lo_mean=lo_mean, hw_frac=hw_frac,
                   rotate_every_rounds=rotate_every_rounds)

    @classmethod
    def burst(cls, spike_mean: float = 1000.0, spike_half_width: float = 100.0,
              on_ms: float = 5000.0, off_ms: float = 10000.0) -> "DelayModel":
        return cls(kind="burst", spike_mean=spike_mean, spike_half_width=spike_half_width,
                   on_ms=on_ms, off_ms=off_ms)

    def with_cluster_size(self, n: int) -> "DelayModel":
        return replace(self, n=n, shift_times=[])

    def shift_at(self, time: float) -> int:
        return bisect.bisect_right(self.shift_times, time)

    def node_mean(self, key: int, time: float) -> float:
        if self.n <= 1:
            return self.lo_mean
        if self.kind == "dynamic":
            key = (key - 1 + self.shift_at(time)) % self.n + 1
        frac = (key - 1) / (self.n - 1)
        return self.hi_mean - (self.hi_mean - self.lo_mean) * frac

    def in_spike(self, time: float) -> bool:
        cycle = self.on_ms + self.off_ms
        return cycle > 0 and (time % cycle) < self.on_ms

    def max_delay(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "uniform":
            return self.mean + self.half_width
        if self.kind in ("skew", "dynamic"):
            return self.hi_mean * (1 + self.hw_frac)
        return self.spike_mean + self.spike_half_width

    def describe(self, time: float) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "uniform":
            return f"uniform({self.mean:g}±{self.half_width:g})"
        if self.kind == "skew":
            return "skew"
        if self.kind == "dynamic":
            return f"skew@{self.shift_at(time)}"
        return "burst:spike" if self.in_spike(time) else "burst:calm"


def sample_delay(model: DelayModel, frm: int, to: int, time: float, rng: random.Random) -> float:
    """One-way delay for a message sent from `frm` to `to` at `time`."""
    if model.kind == "none":
        return 0.0
    if model.kind == "uniform":
        return max(0.0, rng.uniform(model.mean - model.half_width, model.mean + model.half_width))
    if model.kind in ("skew", "dynamic"):
        mean = model.node_mean(max(frm, to), time)
        hw = model.hw_frac * mean
        return max(0.0, rng.uniform(mean - hw, mean + hw))
    if model.kind == "burst":
        if not model.in_spike(time):
            return 0.0
        return max(0.0, rng.uniform(model.spike_mean - model.spike_half_width,
                                    model.spike_mean + model.spike_half_width))
    raise ValueError(f"unknown delay kind {model.kind!r}")


# -------------------------------------------------------------- heterogeneity

ZONE_VCPUS = {"Z1": 1, "Z2": 2, "Z3": 4, "Z4": 8, "Z5": 16}

# Zone population per cluster size (counts for Z1..Z5).
ZONE_COUNTS = {
    3: (1, 0, 1, 0, 1),
    5: (1, 1, 1, 1, 1),
    7: (2, 1, 1, 1, 2),
    11: (2, 2, 2, 2, 3),
    20: (4, 4, 4, 4, 4),
    50: (10, 10, 10, 10, 10),
    100: (20, 20, 20, 20, 20),
}


def _zone_counts(n: int) -> tuple[int, ...]:
    if n in ZONE_COUNTS:
        return ZONE_COUNTS[n]
    counts = [n // 5] * 5
    for zone_index in ((4, 0, 2, 1, 3) * 2)[: n % 5]:
        counts[zone_index] += 1
    return tuple(counts)


@dataclass(frozen=True)
class HeterogeneityProfile:
    """Zoned vCPU configuration driving per-node batch service time."""

    zones: tuple[tuple[str, int, tuple[int, ...]], ...]
    base_service_ms: float = 10.0
    reference_vcpu: int = 4

    def __post_init__(self):
        seen: set[int] = set()
        for _, vcpu, ids in self.zones:
            if vcpu <= 0:
                raise ValueError("zone vcpu count must be positive")
            if seen & set(ids):
                raise ValueError("node in more than one zone")
            seen.update(ids)
        if self.base_service_ms <= 0:
            raise ValueError("base_service_ms must be positive")

    @classmethod
    def heterogeneous(cls, n: int, base_service_ms: float = 10.0) -> "HeterogeneityProfile":
        counts = _zone_counts(n)
        zones = []
        nid = 1
        for (zone, vcpu), count in zip(ZONE_VCPUS.items(), counts):
            ids = tuple(range(nid, nid + count))
            nid += count
            if ids:
                zones.append((zone, vcpu, ids))
        return cls(tuple(zones), base_service_ms)

    @classmethod
    def homogeneous(cls, n: int, base_service_ms: float = 10.0) -> "HeterogeneityProfile":
        return cls((("Z3", ZONE_VCPUS["Z3"], tuple(range(1, n + 1))),), base_service_ms)

    def vcpu(self, node_id: int) -> int:
        for _, vcpu, ids in self.zones:
            if node_id in ids:
                return vcpu
        raise KeyError(f"node {node_id} not in any zone")

    def service_ms(self, node_id: int) -> float:
        return self.base_service_ms * (self.reference_vcpu / self.vcpu(node_id))

    def max_service_ms(self) -> float:
        return max(self.base_service_ms * (self.reference_vcpu / v) for _, v, ids in self.zones if ids)


# -------------------------------------------------------------------- crashes


@dataclass(frozen=True)
class CrashPlan:
    """Kill x nodes at a round boundary.

    strong/weak target the highest/lowest current weights among live
    followers (the leader is spared unless include_leader is set); random
    draws uniformly from all live nodes.  With stagger > 0 one node dies
    every `stagger` rounds instead of all at once.  Targets are resolved
    against the weight assignment in force at each trigger instant.
    """

    strategy: str
    x: int
    trigger_round: int
    stagger: int = 0
    include_leader: bool = False

    def __post_init__(self):
        if self.strategy not in ("strong", "weak", "random"):
            raise ValueError(f"unknown crash strategy {self.strategy!r}")
        if self.x < 0:
            raise ValueError("crash count must be nonnegative")
        if self.trigger_round < 1:
            raise ValueError("trigger_round must be >= 1")

    def kills_at(self, round_no: int) -> int:
        if self.x == 0:
            return 0
        if self.stagger <= 0:
            return self.x if round_no == self.trigger_round else 0
        offset = round_no - self.trigger_round
        if offset < 0 or offset % self.stagger != 0:
            return 0
        return 1 if offset // self.stagger < self.x else 0


@dataclass(frozen=True)
class LoadChange:
    """Multiply one node's service time from a given round on."""

    round: int
    node: int
    factor: float


@dataclass(frozen=True)
class Recovery:
    round: int
    node: int


def suggest_election_timeouts(profile: HeterogeneityProfile, delays: DelayModel,
                              grace_factor: float = 2.0, max_load: float = 1.0) -> tuple[float, float]:
    """Timeout range that keeps steady-state rounds from triggering elections."""
    round_ms = 2 * delays.max_delay() + profile.max_service_ms() * max_load + 1.0
    gap = round_ms * (1 + grace_factor) + delays.max_delay()
    lo = max(150.0, 3.0 * gap)
    return (lo, 2.0 * lo)


# ----------------------------------------------------------------- simulation


class Simulation:
    """One isolated cluster run; see `run` for the outcome."""

    def __init__(
        self,
        config: ClusterConfig,
        profile: HeterogeneityProfile,
        delays: DelayModel,
        crashes: tuple[CrashPlan, ...] = (),
        *,
        mix: OperationMix,
        batch_size: int,
        seed: int,
        rounds: int,
        grace_factor: float = 2.0,
        time_cap_ms: float | None = None,
        reconfig_schedule: tuple[tuple[int, int], ...] = (),
        load_changes: tuple[LoadChange, ...] = (),
        recoveries: tuple[Recovery, ...] = (),
        kind_costs: dict[str, float] | None = None,
        boot_leader_id: int = 1,
    ):
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        self.config = config
        self.profile = profile
        self.delays = delays.with_cluster_size(config.n)
        self.crashes = tuple(crashes)
        self.mix = mix
        self.batch_size = batch_size
        self.seed = seed
        self.rounds_target = rounds
        self.grace_factor = grace_factor
        self.reconfig_schedule = dict(reconfig_schedule)
        self.load_changes = tuple(load_changes)
        self.recoveries = tuple(recoveries)
        self.kind_costs = kind_costs
        self.boot_leader_id = boot_leader_id

        est_round = 2 * self.delays.max_delay() + profile.max_service_ms() + 1.0
        self.time_cap = time_cap_ms if time_cap_ms is not None else 1000.0 * est_round

        ids = list(range(1, config.n + 1))
        self.nodes = {i: Node(i, config, ids) for i in ids}
        self.alive = {i: True for i in ids}
        self.crash_epoch = {i: 0 for i in ids}
        self.load_factor = {i: 1.0 for i in ids}
        self.election_deadline: dict[int, float] = {}

        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._rngs: dict[str, random.Random] = {}
        self.trace = ExecutionTrace(algo=config.algo.value, n=config.n, t=config.t, seed=seed)
        if config.algo is Algo.CABINET:
            self.trace.schemes[config.epoch] = config.scheme.weights
        self.live_rounds: dict[int, RoundStats] = {}
        self.cost_by_wclock: dict[int, float] = {}
        self.client_rounds_started = 0
        self.client_rounds_done = 0
        self.batch_counter = 0
        self.last_progress = 0.0
        self.stopped = False
        self._triggered_rounds: set[int] = set()

    # ----------------------------------------------------------- primitives

    def _rng(self, purpose: str) -> random.Random:
        rng = self._rngs.get(purpose)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}|{purpose}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._rngs[purpose] = rng
        return rng

    def _push(self, time: float, kind: str, data) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, data))
        self._seq += 1

    def _record(self, kind: str, *, frm=None, to=None, term=None, wclock=None,
                weight=None, index=None, extra=None) -> None:
        self.trace.add(TraceRecord(self.now, kind, frm, to, term, wclock, weight, index, extra))

    def _send(self, frm: int, to: int, msg) -> None:
        delay = sample_delay(self.delays, frm, to, self.now, self._rng(f"delay|{frm}|{to}"))
        self._push(self.now + delay, "deliver", (frm, to, msg, self.crash_epoch[frm]))

    def _arm_timer(self, node_id: int) -> None:
        deadline = self.now + self.nodes[node_id].draw_election_timeout(self._rng(f"timeout|{node_id}"))
        self.election_deadline[node_id] = deadline
        self._push(deadline, "timer", (node_id, deadline))

    def _current_leader_id(self) -> int | None:
        best = None
        for nid, node in self.nodes.items():
            if self.alive[nid] and node.role is Role.LEADER:
                if best is None or node.current_term > self.nodes[best].current_term:
                    best = nid
        return best

    def _crashed_count(self) -> int:
        return sum(1 for a in self.alive.values() if not a)

    # ------------------------------------------------------------------ run

    def run(self) -> ExecutionTrace:
        """Drive the event loop until the requested rounds commit.

        Raises LivelockError (with the partial trace attached) when
        simulated time advances past the cap with no new commit.
        """
        self._boot()
        while self._heap and not self.stopped:
            time, _, kind, data = heapq.heappop(self._heap)
            if time - self.last_progress > self.time_cap:
                raise LivelockError(
                    f"no commit for {time - self.last_progress:.0f} ms simulated", self.trace
                )
            self.now = time
            if kind == "deliver":
                self._on_deliver(*data)
            elif kind == "timer":
                self._on_timer(*data)
            elif kind == "finalize":
                self._on_finalize(*data)
            elif kind == "driver":
                self._on_driver(data)
        if not self.stopped:
            raise LivelockError("cluster halted before completing the requested rounds", self.trace)
        self.trace.meta["final_time_ms"] = self.now
        return self.trace

    def _boot(self) -> None:
        leader = self.nodes[self.boot_leader_id]
        leader.current_term = 1
        leader.become_leader(0.0)
        self._record("role", frm=leader.id, term=1, extra={"role": "leader", "log": []})
        for nid in self.nodes:
            if nid != leader.id:
                self._arm_timer(nid)
        self._push(0.0, "driver", leader.id)

    # ------------------------------------------------------------- handlers

    def _on_driver(self, leader_id: int) -> None:
        node = self.nodes[leader_id]
        if self.stopped or not self.alive[leader_id] or node.role is not Role.LEADER:
            return
        if node.round_open:
            return
        if self.client_rounds_done >= self.rounds_target:
            self.stopped = True
            return
        upcoming = self.client_rounds_started + 1
        self._apply_round_triggers(upcoming)
        if not self.alive[leader_id]:
            return

        t_new = self.reconfig_schedule.pop(upcoming, None)
        if t_new is not None:
            msgs = node.reconfigure_threshold(t_new, self.now)
            stats = self._open_stats(node, round_no=0, kind="config", batch_size=0)
            self.cost_by_wclock[node.round_wclock] = 1.0
            self._record(
                "round", frm=node.id, term=node.current_term, wclock=node.round_wclock,
                index=node.round_entry_index, extra={"kind": "config", "t_new": t_new},
            )
        else:
            batch = generate_batch(self.mix, self.batch_size, self._rng("workload"), self.batch_counter)
            self.batch_counter += 1
            msgs = node.start_round(batch, self.now)
            self.client_rounds_started = upcoming
            stats = self._open_stats(node, round_no=upcoming, kind="client", batch_size=batch.size)
            self.cost_by_wclock[node.round_wclock] = batch_cost(batch, self.kind_costs)
            self._record(
                "round", frm=node.id, term=node.current_term, wclock=node.round_wclock,
                index=node.round_entry_index, extra={"kind": "client", "round": upcoming},
            )
        self.live_rounds[node.round_wclock] = stats
        if self.config.algo is Algo.CABINET:
            epoch = (node.pending_config or node.config).epoch
            for nid, w in sorted(node.assignment.items()):
                self._record("assign", frm=nid, wclock=node.round_wclock, weight=w,
                             extra={"epoch": epoch})
        for fid, msg in zip(node.peers, msgs):
            self._record("append", frm=node.id, to=fid, term=msg.term, wclock=msg.wclock,
                         weight=msg.weight, index=node.round_entry_index)
            self._send(node.id, fid, msg)

    def _open_stats(self, node: Node, round_no: int, kind: str, batch_size: int) -> RoundStats:
        return RoundStats(
            round=round_no,
            wclock=node.round_wclock,
            leader_id=node.id,
            start_time=self.now,
            batch_size=batch_size,
            cabinet_ids=node.cabinet_ids(),
            regime=self.delays.describe(self.now),
            crashed_count=self._crashed_count(),
            kind=kind,
        )

    def _apply_round_triggers(self, round_no: int) -> None:
        if round_no in self._triggered_rounds:
            return
        self._triggered_rounds.add(round_no)

        if (
            self.delays.kind == "dynamic"
            and round_no > 1
            and (round_no - 1) % self.delays.rotate_every_rounds == 0
        ):
            self.delays.shift_times.append(self.now)
            self._record("regime", extra={"shift": self.delays.shift_at(self.now), "round": round_no})

        for change in self.load_changes:
            if change.round == round_no:
                self.load_factor[change.node] = change.factor
                self._record("load", frm=change.node, weight=change.factor)

        for rec in self.recoveries:
            if rec.round == round_no and not self.alive[rec.node]:
                self.alive[rec.node] = True
                node = self.nodes[rec.node]
                node.role = Role.FOLLOWER
                node.round_open = False
                self._record("recover", frm=rec.node)
                self._arm_timer(rec.node)

        for plan in self.crashes:
            count = plan.kills_at(round_no)
            if count:
                for target in self._resolve_crash_targets(plan, count):
                    self._crash(target)

    def _resolve_crash_targets(self, plan: CrashPlan, count: int) -> list[int]:
        leader_id = self._current_leader_id()
        candidates = [
            nid for nid, up in self.alive.items()
            if up and (plan.include_leader or nid != leader_id)
        ]
        if not candidates:
            return []
        if plan.strategy == "random":
            rng = self._rng("crash")
            return rng.sample(sorted(candidates), min(count, len(candidates)))
        weights = {}
        if leader_id is not None and self.nodes[leader_id].assignment:
            weights = self.nodes[leader_id].assignment
        key = (lambda nid: (-weights.get(nid, 1.0), nid)) if plan.strategy == "strong" else (
            lambda nid: (weights.get(nid, 1.0), nid)
        )
        return sorted(candidates, key=key)[:count]

    def _crash(self, node_id: int) -> None:
        self.alive[node_id] = False
        self.crash_epoch[node_id] += 1
        self.election_deadline.pop(node_id, None)
        self._record("crash", frm=node_id)

    def _on_deliver(self, frm: int, to: int, msg, sent_epoch: int) -> None:
        if self.stopped or not self.alive[to] or self.crash_epoch[frm] != sent_epoch:
            return
        if isinstance(msg, AppendEntriesMsg):
            self._deliver_append(frm, to, msg)
        elif isinstance(msg, AppendReply):
            self._deliver_append_reply(frm, to, msg)
        elif isinstance(msg, VoteRequest):
            self._deliver_vote_request(frm, to, msg)
        elif isinstance(msg, VoteReply):
            self._deliver_vote_reply(frm, to, msg)

    def _deliver_append(self, frm: int, to: int, msg: AppendEntriesMsg) -> None:
        node = self.nodes[to]
        prev_commit = node.commit_index
        was_leader = node.role is Role.LEADER
        reply = node.handle_append_entries(msg, self.now)
        if reply.success or msg.term >= node.current_term:
            self._arm_timer(to)
        if was_leader and node.role is not Role.LEADER:
            self._record("role", frm=to, term=node.current_term, extra={"role": "follower"})
        self._record_commits(node, prev_commit)
        service = self.profile.service_ms(to) * self.load_factor[to] * self.cost_by_wclock.get(msg.wclock, 1.0)
        delay = sample_delay(self.delays, to, frm, self.now, self._rng(f"delay|{to}|{frm}"))
        self._push(self.now + service + delay, "deliver", (to, frm, reply, self.crash_epoch[to]))

    def _record_commits(self, node: Node, prev_commit: int) -> None:
        for idx in range(prev_commit + 1, node.commit_index + 1):
            entry = node.entry_at(idx)
            self._record("commit", frm=node.id, term=entry.term, wclock=entry.wclock,
                         index=idx, extra={"kind": entry.kind})

    def _deliver_append_reply(self, frm: int, to: int, reply: AppendReply) -> None:
        node = self.nodes[to]
        if node.role is not Role.LEADER:
            return
        prev_commit = node.commit_index
        prev_epoch = node.config.epoch
        outcome = node.on_append_reply(reply, self.now)
        if node.role is not Role.LEADER:
            self._record("role", frm=to, term=node.current_term, extra={"role": "follower"})
            self._arm_timer(to)
            return
        if reply.success and outcome.ignored is None:
            self._record("reply", frm=frm, to=to, term=reply.term,
                         wclock=reply.echoed_wclock, weight=reply.echoed_weight,
                         index=reply.acked_index)
        elif not reply.success:
            self._record("reply_fail", frm=frm, to=to, term=reply.term,
                         wclock=reply.echoed_wclock, index=reply.acked_index)
        if outcome.resend is not None:
            self._record("append", frm=to, to=frm, term=outcome.resend.term,
                         wclock=outcome.resend.wclock, weight=outcome.resend.weight,
                         index=node.round_entry_index)
            self._send(to, frm, outcome.resend)
        if outcome.committed_now:
            self._record_commits(node, prev_commit)
            stats = self.live_rounds[reply.echoed_wclock]
            stats.commit_time = self.now
            stats.replies_at_commit = node.round_replies_at_commit
            self.last_progress = self.now
            if node.config.epoch != prev_epoch:
                scheme = node.config.scheme
                self.trace.schemes[node.config.epoch] = scheme.weights if scheme else ()
                self._record("config", frm=node.id, term=node.current_term,
                             wclock=reply.echoed_wclock, index=node.round_entry_index,
                             extra={"epoch": node.config.epoch, "t": node.config.t})
            latency = stats.commit_latency_ms
            self._push(self.now + self.grace_factor * latency, "finalize",
                       (to, reply.echoed_wclock))

    def _deliver_vote_request(self, frm: int, to: int, req: VoteRequest) -> None:
        node = self.nodes[to]
        was_leader = node.role is Role.LEADER
        reply = node.handle_vote_request(req)
        if was_leader and node.role is not Role.LEADER:
            self._record("role", frm=to, term=node.current_term, extra={"role": "follower"})
        if reply.granted:
            self._record("vote", frm=to, to=frm, term=reply.term)
            self._arm_timer(to)
        self._send(to, frm, reply)

    def _deliver_vote_reply(self, frm: int, to: int, reply: VoteReply) -> None:
        node = self.nodes[to]
        won = node.on_vote_reply(reply)
        if won:
            log_summary = [(e.index, e.term) for e in node.log]
            self._record("role", frm=to, term=node.current_term,
                         extra={"role": "leader", "log": log_summary,
                                "commit_index": node.commit_index})
            self.election_deadline.pop(to, None)
            self._push(self.now, "driver", to)

    def _on_timer(self, node_id: int, deadline: float) -> None:
        if self.stopped or not self.alive[node_id]:
            return
        node = self.nodes[node_id]
        if node.role is Role.LEADER or self.election_deadline.get(node_id) != deadline:
            return
        node.start_election(self.now)
        self._record("role", frm=node_id, term=node.current_term, extra={"role": "candidate"})
        req = VoteRequest(node.current_term, node_id, node.last_log_index(), node.last_log_term())
        for peer in node.peers:
            self._record("vote_req", frm=node_id, to=peer, term=req.term)
            self._send(node_id, peer, req)
        self._arm_timer(node_id)

    def _on_finalize(self, leader_id: int, wclock: int) -> None:
        node = self.nodes[leader_id]
        if (
            self.stopped
            or not self.alive[leader_id]
            or node.role is not Role.LEADER
            or not node.round_open
            or node.round_wclock != wclock
        ):
            return
        node.finalize_round(self.now)
        stats = self.live_rounds[wclock]
        stats.finalize_time = self.now
        self.trace.rounds.append(stats)
        if stats.kind == "client":
            self.client_rounds_done += 1
        if self.client_rounds_done >= self.rounds_target:
            self.stopped = True
            return
        self._push(self.now, "driver", leader_id)
