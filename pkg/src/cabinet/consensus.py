"""Event-driven node state machines for weighted and majority replication.

Nodes are pure handlers: the simulator (or a test) feeds one message or
timer at a time and collects the emitted messages.  There are no threads
and no shared state between nodes.

The weighted algorithm ("cabinet") extends classic leader-based log
replication with two extra message fields: a monotone *weight clock*
identifying the round, and the recipient's *weight* for that round.  The
leader accumulates replying weights until they exceed the consensus
threshold, then reassigns weights for the next round so that faster
repliers hold higher weights.  The baseline keeps unit weights and a
simple majority quorum, expressed through the same machinery with ct = n/2.
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable

from .weights import WeightScheme, generate_scheme, max_failure_threshold

__all__ = [
    "Algo",
    "AppendEntriesMsg",
    "AppendReply",
    "ClusterConfig",
    "ConflictingConfirmations",
    "LogEntry",
    "Node",
    "NotLeaderError",
    "ReadResult",
    "Role",
    "RoundInFlightError",
    "RoundNotOpenError",
    "RoundStatus",
    "VoteReply",
    "VoteRequest",
    "WeightQueue",
    "weighted_read",
]


class Role(Enum):
    LEADER = "leader"
    FOLLOWER = "follower"
    CANDIDATE = "candidate"


class Algo(Enum):
    CABINET = "cabinet"
    BASELINE = "baseline"


class RoundStatus(Enum):
    PENDING = "pending"
    COMMITTED = "committed"


class NotLeaderError(RuntimeError):
    pass


class RoundInFlightError(RuntimeError):
    pass


class RoundNotOpenError(RuntimeError):
    pass


class ConflictingConfirmations(AssertionError):
    """Two distinct values both exceeded the consensus threshold.

    This must be impossible for a valid scheme; raising it flags a safety
    bug rather than an expected outcome.
    """


@dataclass(frozen=True)
class ClusterConfig:
    n: int
    t: int
    scheme: WeightScheme | None
    election_timeout_range: tuple[float, float] = (150.0, 300.0)
    epoch: int = 0
    algo: Algo = Algo.CABINET

    def __post_init__(self):
        if self.algo is Algo.CABINET:
            if self.scheme is None:
                raise ValueError("cabinet config requires a weight scheme")
            if self.scheme.n != self.n or self.scheme.t != self.t:
                raise ValueError("scheme does not match (n, t)")
        lo, hi = self.election_timeout_range
        if not 0 < lo <= hi:
            raise ValueError("bad election timeout range")

    @property
    def majority(self) -> int:
        return self.n // 2 + 1

    @property
    def election_quorum(self) -> int:
        if self.algo is Algo.CABINET:
            return self.n - self.t
        return self.majority

    @property
    def commit_threshold(self) -> float:
        """Weight sum that must be strictly exceeded to commit."""
        if self.algo is Algo.CABINET:
            return self.scheme.ct
        return self.n / 2

    def round_weights(self) -> tuple[float, ...]:
        if self.algo is Algo.CABINET:
            return self.scheme.weights
        return tuple(1.0 for _ in range(self.n))


ENTRY_CLIENT = "client"
ENTRY_CONFIG = "config"


@dataclass(frozen=True)
class LogEntry:
    index: int
    term: int
    wclock: int
    batch: Any
    committed_weight: float
    kind: str = ENTRY_CLIENT
    config: ClusterConfig | None = None


@dataclass(frozen=True)
class AppendEntriesMsg:
    term: int
    leader_id: int
    prev_index: int
    prev_term: int
    entries: tuple[LogEntry, ...]
    leader_commit: int
    wclock: int
    weight: float


@dataclass(frozen=True)
class AppendReply:
    term: int
    from_id: int
    success: bool
    acked_index: int  # last log index on success; last-index hint on failure
    echoed_wclock: int
    echoed_weight: float


@dataclass(frozen=True)
class VoteRequest:
    term: int
    candidate_id: int
    last_log_index: int
    last_log_term: int


@dataclass(frozen=True)
class VoteReply:
    term: int
    from_id: int
    granted: bool


class WeightQueue:
    """FIFO of (weight, node) reply arrivals for the open round.

    At most one entry per node.  Entries sharing an arrival timestamp are
    kept in ascending node-id order regardless of processing order.
    """

    def __init__(self):
        self._items: list[tuple[float, int, float]] = []  # (time, node_id, weight)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __contains__(self, node_id: int) -> bool:
        return any(nid == node_id for _, nid, _ in self._items)

    def node_order(self) -> list[int]:
        return [nid for _, nid, _ in self._items]

    def push(self, time: float, node_id: int, weight: float) -> None:
        if node_id in self:
            raise ValueError(f"duplicate queue entry for node {node_id}")
        pos = len(self._items)
        while pos > 0 and self._items[pos - 1][0] == time and self._items[pos - 1][1] > node_id:
            pos -= 1
        self._items.insert(pos, (time, node_id, weight))


@dataclass
class ReplyOutcome:
    status: RoundStatus
    committed_now: bool = False
    resend: AppendEntriesMsg | None = None
    ignored: str | None = None  # "stale_wclock" | "duplicate_reply" when dropped


class Node:
    """One replica: leader round management, log replication, elections."""

    def __init__(self, node_id: int, config: ClusterConfig, peer_ids: Iterable[int]):
        self.id = node_id
        self.initial_config = config
        self.config = config
        self.peers = tuple(sorted(p for p in peer_ids if p != node_id))
        self.role = Role.FOLLOWER
        self.current_term = 0
        self.voted_for: int | None = None
        self.leader_id: int | None = None
        self.log: list[LogEntry] = []
        self.commit_index = 0
        self.weight_state: tuple[int, float] = (0, 0.0)  # (wclock, weight) last stored
        self.max_wclock = 0

        # leader-side state
        self.assignment: dict[int, float] = {}
        self.next_index: dict[int, int] = {}
        self.match_index: dict[int, int] = {}
        self.round_open = False
        self.round_wclock = 0
        self.round_ct = 0.0
        self.round_entry_index = 0
        self.round_start_time = 0.0
        self.round_committed = False
        self.round_commit_time = 0.0
        self.round_replies_at_commit = 0
        self.weight_queue = WeightQueue()
        self.acc_weight = 0.0
        self.pending_config: ClusterConfig | None = None

        # candidate-side state
        self.votes_granted: set[int] = set()

    # ------------------------------------------------------------------ log

    def last_log_index(self) -> int:
        return self.log[-1].index if self.log else 0

    def last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def entry_at(self, index: int) -> LogEntry | None:
        if 1 <= index <= len(self.log):
            return self.log[index - 1]
        return None

    def committed_entries(self) -> list[LogEntry]:
        return self.log[: self.commit_index]

    # -------------------------------------------------------------- weights

    def initial_assignment(self) -> dict[int, float]:
        """Leader takes the top weight; the rest descend by node id."""
        weights = self.config.round_weights()
        order = [self.id] + [p for p in self.peers]
        return {nid: weights[i] for i, nid in enumerate(order)}

    def cabinet_ids(self) -> tuple[int, ...]:
        """Current round's t+1 highest-weight holders (cabinet runs only)."""
        if self.config.algo is not Algo.CABINET or not self.assignment:
            return ()
        ranked = sorted(self.assignment.items(), key=lambda kv: (-kv[1], kv[0]))
        return tuple(sorted(nid for nid, _ in ranked[: self.config.t + 1]))

    # --------------------------------------------------------------- leader

    def _open_round(self, entry: LogEntry, now: float, ct: float,
                    weights_for_round: dict[int, float]) -> list[AppendEntriesMsg]:
        self.log.append(entry)
        self.max_wclock = entry.wclock
        self.round_open = True
        self.round_wclock = entry.wclock
        self.round_ct = ct
        self.round_entry_index = entry.index
        self.round_start_time = now
        self.round_committed = False
        self.round_replies_at_commit = 0
        self.weight_queue = WeightQueue()
        self.acc_weight = weights_for_round[self.id]
        msgs = []
        for fid in self.peers:
            msgs.append(self._append_msg_for(fid, weights_for_round[fid]))
        return msgs

    def _append_msg_for(self, fid: int, weight: float) -> AppendEntriesMsg:
        nxt = self.next_index[fid]
        prev = self.entry_at(nxt - 1)
        return AppendEntriesMsg(
            term=self.current_term,
            leader_id=self.id,
            prev_index=nxt - 1,
            prev_term=prev.term if prev else 0,
            entries=tuple(self.log[nxt - 1 :]),
            leader_commit=self.commit_index,
            wclock=self.round_wclock,
            weight=weight,
        )

    def start_round(self, batch: Any, now: float = 0.0) -> list[AppendEntriesMsg]:
        """Open a replication round for one batch; one message per follower."""
        if self.role is not Role.LEADER:
            raise NotLeaderError(f"node {self.id} is {self.role.value}")
        if self.round_open:
            raise RoundInFlightError("previous round not finalized")
        wclock = self.max_wclock + 1
        entry = LogEntry(
            index=self.last_log_index() + 1,
            term=self.current_term,
            wclock=wclock,
            batch=batch,
            committed_weight=self.assignment[self.id],
        )
        return self._open_round(entry, now, self.config.commit_threshold, self.assignment)

    def reconfigure_threshold(self, t_new: int, now: float = 0.0,
                              scheme_factory: Callable[[int, int], WeightScheme] = generate_scheme,
                              ) -> list[AppendEntriesMsg]:
        """Broadcast a new failure threshold as a special round.

        The round's messages carry the *new* scheme's weights (mapped onto
        nodes by their current weight rank) and its commitment is judged
        against the new threshold.  Client replication stays suspended
        until the configuration commits; rounds are sequential, so the
        suspension is the config round itself.
        """
        if self.role is not Role.LEADER:
            raise NotLeaderError(f"node {self.id} is {self.role.value}")
        if self.round_open:
            raise RoundInFlightError("cannot reconfigure mid-round")
        if not 1 <= t_new <= max_failure_threshold(self.config.n):
            from .weights import BadThresholdError

            raise BadThresholdError(
                f"t={t_new} outside [1, {max_failure_threshold(self.config.n)}]"
            )
        new_config = dataclasses.replace(
            self.config,
            t=t_new,
            scheme=scheme_factory(self.config.n, t_new) if self.config.algo is Algo.CABINET else None,
            epoch=self.config.epoch + 1,
        )
        ranked = sorted(self.assignment.items(), key=lambda kv: (-kv[1], kv[0]))
        new_weights = new_config.round_weights()
        mapped = {nid: new_weights[i] for i, (nid, _) in enumerate(ranked)}
        self.assignment = mapped
        self.pending_config = new_config
        wclock = self.max_wclock + 1
        entry = LogEntry(
            index=self.last_log_index() + 1,
            term=self.current_term,
            wclock=wclock,
            batch=None,
            committed_weight=mapped[self.id],
            kind=ENTRY_CONFIG,
            config=new_config,
        )
        return self._open_round(entry, now, new_config.commit_threshold, mapped)

    def on_append_reply(self, reply: AppendReply, now: float = 0.0) -> ReplyOutcome:
        """Fold one reply into the open round.

        Successful replies enter the weight queue and the accumulator; the
        round commits the first time the accumulator exceeds the round's
        threshold.  Log-mismatch replies earn no credit and trigger an
        immediate targeted resend (standard log repair).  Replies from an
        older weight clock, or duplicates, are ignored.
        """
        if reply.term > self.current_term:
            self.step_down(reply.term)
            return ReplyOutcome(RoundStatus.PENDING, ignored="stale_term")
        if self.role is not Role.LEADER or reply.term < self.current_term:
            return ReplyOutcome(RoundStatus.PENDING, ignored="stale_term")

        if reply.success:
            self.match_index[reply.from_id] = max(
                self.match_index.get(reply.from_id, 0), reply.acked_index
            )
            self.next_index[reply.from_id] = self.match_index[reply.from_id] + 1

        if not self.round_open or reply.echoed_wclock != self.round_wclock:
            status = RoundStatus.COMMITTED if self.round_committed else RoundStatus.PENDING
            return ReplyOutcome(status, ignored="stale_wclock")

        if not reply.success:
            hint = min(self.next_index[reply.from_id] - 1, reply.acked_index + 1)
            self.next_index[reply.from_id] = max(1, hint)
            resend = self._append_msg_for(reply.from_id, self.assignment[reply.from_id])
            return ReplyOutcome(RoundStatus.PENDING, resend=resend)

        if reply.from_id in self.weight_queue:
            status = RoundStatus.COMMITTED if self.round_committed else RoundStatus.PENDING
            return ReplyOutcome(status, ignored="duplicate_reply")

        self.weight_queue.push(now, reply.from_id, reply.echoed_weight)
        self.acc_weight += reply.echoed_weight
        if not self.round_committed and self.acc_weight > self.round_ct:
            self.round_committed = True
            self.round_commit_time = now
            self.round_replies_at_commit = len(self.weight_queue)
            self.commit_index = max(self.commit_index, self.round_entry_index)
            if self.pending_config is not None:
                self.config = self.pending_config
                self.pending_config = None
            return ReplyOutcome(RoundStatus.COMMITTED, committed_now=True)
        return ReplyOutcome(
            RoundStatus.COMMITTED if self.round_committed else RoundStatus.PENDING
        )

    def finalize_round(self, now: float = 0.0) -> dict[int, float]:
        """Close the round and install next-round weights.

        Repliers keep their arrival order (post-commit arrivals included);
        nodes that never completed replication get the remaining lowest
        weights in descending order of their previous weight, ties broken
        by node id.  Every scheme weight lands on exactly one node.
        """
        if not self.round_open:
            raise RoundNotOpenError("no round to finalize")
        prev = self.assignment
        order = [self.id] + self.weight_queue.node_order()
        silent = sorted(
            (nid for nid in self.peers if nid not in self.weight_queue),
            key=lambda nid: (-prev[nid], nid),
        )
        order.extend(silent)
        weights = self.config.round_weights()
        self.assignment = {nid: weights[i] for i, nid in enumerate(order)}
        self.round_open = False
        return dict(self.assignment)

    # ------------------------------------------------------------- follower

    def handle_append_entries(self, msg: AppendEntriesMsg, now: float = 0.0) -> AppendReply:
        """Append entries after the standard consistency check; store the
        round's (wclock, weight) pair; echo both back."""
        if msg.term < self.current_term:
            return AppendReply(
                term=self.current_term,
                from_id=self.id,
                success=False,
                acked_index=self.last_log_index(),
                echoed_wclock=msg.wclock,
                echoed_weight=msg.weight,
            )
        if msg.term > self.current_term:
            self.current_term = msg.term
            self.voted_for = None
        self.role = Role.FOLLOWER
        self.leader_id = msg.leader_id

        if msg.prev_index > 0:
            prev = self.entry_at(msg.prev_index)
            if prev is None or prev.term != msg.prev_term:
                return AppendReply(
                    term=self.current_term,
                    from_id=self.id,
                    success=False,
                    acked_index=min(self.last_log_index(), msg.prev_index - 1),
                    echoed_wclock=msg.wclock,
                    echoed_weight=msg.weight,
                )

        for entry in msg.entries:
            existing = self.entry_at(entry.index)
            if existing is not None and existing.term == entry.term:
                continue
            if existing is not None:
                del self.log[entry.index - 1 :]
            self.log.append(dataclasses.replace(entry, committed_weight=msg.weight))

        self._adopt_latest_log_config()
        self.weight_state = (msg.wclock, msg.weight)
        self.max_wclock = max(self.max_wclock, msg.wclock)
        if msg.leader_commit > self.commit_index:
            self.commit_index = min(msg.leader_commit, self.last_log_index())
        return AppendReply(
            term=self.current_term,
            from_id=self.id,
            success=True,
            acked_index=self.last_log_index(),
            echoed_wclock=msg.wclock,
            echoed_weight=msg.weight,
        )

    def _adopt_latest_log_config(self) -> None:
        for entry in reversed(self.log):
            if entry.kind == ENTRY_CONFIG:
                if entry.config.epoch != self.config.epoch:
                    self.config = entry.config
                return
        if self.config.epoch != self.initial_config.epoch:
            self.config = self.initial_config

    # ------------------------------------------------------------ elections

    def start_election(self, now: float = 0.0) -> list[VoteRequest]:
        """Become candidate in a fresh term and request votes from peers."""
        self.role = Role.CANDIDATE
        self.current_term += 1
        self.voted_for = self.id
        self.votes_granted = {self.id}
        self.leader_id = None
        req = VoteRequest(
            term=self.current_term,
            candidate_id=self.id,
            last_log_index=self.last_log_index(),
            last_log_term=self.last_log_term(),
        )
        return [req for _ in self.peers]

    def handle_vote_request(self, req: VoteRequest) -> VoteReply:
        """Grant iff the term is current, no vote was spent this term, and
        the candidate's log is at least as up-to-date as ours."""
        if req.term > self.current_term:
            self.current_term = req.term
            self.voted_for = None
            if self.role is not Role.FOLLOWER:
                self.role = Role.FOLLOWER
        up_to_date = (req.last_log_term, req.last_log_index) >= (
            self.last_log_term(),
            self.last_log_index(),
        )
        grant = (
            req.term == self.current_term
            and self.voted_for in (None, req.candidate_id)
            and up_to_date
        )
        if grant:
            self.voted_for = req.candidate_id
        return VoteReply(term=self.current_term, from_id=self.id, granted=grant)

    def on_vote_reply(self, reply: VoteReply) -> bool:
        """Count a vote; returns True when this node just won the election."""
        if reply.term > self.current_term:
            self.step_down(reply.term)
            return False
        if self.role is not Role.CANDIDATE or reply.term != self.current_term:
            return False
        if reply.granted:
            self.votes_granted.add(reply.from_id)
            if len(self.votes_granted) >= self.config.election_quorum:
                self.become_leader()
                return True
        return False

    def become_leader(self, now: float = 0.0) -> dict[int, float]:
        """Install leadership: fresh weight assignment (self on top, rest
        descending by node id) and a weight clock above anything observed."""
        self.role = Role.LEADER
        self.leader_id = self.id
        self.next_index = {p: self.last_log_index() + 1 for p in self.peers}
        self.match_index = {p: 0 for p in self.peers}
        self.round_open = False
        self.pending_config = None
        log_max = max((e.wclock for e in self.log), default=0)
        self.max_wclock = max(self.max_wclock, log_max)
        self.assignment = self.initial_assignment()
        return dict(self.assignment)

    def step_down(self, term: int) -> None:
        if term > self.current_term:
            self.current_term = term
            self.voted_for = None
        self.role = Role.FOLLOWER
        self.round_open = False
        self.pending_config = None

    def draw_election_timeout(self, rng: random.Random) -> float:
        lo, hi = self.config.election_timeout_range
        return rng.uniform(lo, hi)


@dataclass(frozen=True)
class ReadResult:
    confirmed: bool
    value: Any = None
    accumulated: float = 0.0


def weighted_read(replies: Iterable[tuple[Any, float]], ct: float) -> ReadResult:
    """Client-side read confirmation: accumulate stored weights per value.

    Returns the value whose accumulated committed weight exceeds ct, or an
    unconfirmed result when none does.  Two distinct confirmed values can
    never happen with a valid scheme; that case raises.
    """
    groups: list[tuple[Any, float]] = []
    for value, weight in replies:
        for i, (v, acc) in enumerate(groups):
            if v == value:
                groups[i] = (v, acc + weight)
                break
        else:
            groups.append((value, weight))
    confirmed = [(v, acc) for v, acc in groups if acc > ct]
    if len(confirmed) > 1:
        raise ConflictingConfirmations(f"values {[v for v, _ in confirmed]} all exceed ct={ct}")
    if confirmed:
        v, acc = confirmed[0]
        return ReadResult(True, v, acc)
    best = max((acc for _, acc in groups), default=0.0)
    return ReadResult(False, None, best)
