"""Independent brute-force oracles and trace auditors.

Everything here re-derives results by enumeration or order statistics,
deliberately sharing no code path with the scheme generator or the
simulator it checks.  Subset sums use exact integer arithmetic over
decimal-scaled weights so float margins can never flip a verdict.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .trace import ExecutionTrace
from .weights import SchemeVerdict, Violation, validate_scheme

__all__ = [
    "AuditViolation",
    "ExhaustiveReport",
    "InfeasibleQuorumError",
    "TooLargeError",
    "audit_trace",
    "commit_time_oracle",
    "exhaustive_scheme_check",
    "expected_commit_times",
    "triage_scheme",
]

EXHAUSTIVE_MAX_N = 20
SCALE_DIGITS = 9


class TooLargeError(ValueError):
    """Subset enumeration is capped at 20 nodes."""


class InfeasibleQuorumError(RuntimeError):
    """Surviving weight can never exceed the consensus threshold."""


def _scaled(values) -> list[int]:
    return [round(v * 10**SCALE_DIGITS) for v in values]


@dataclass(frozen=True)
class ExhaustiveReport:
    """Results of enumerating every node subset against the threshold.

    survivor_quorums_ok: every subset of n-t nodes outweighs ct.
    non_cabinet_below_ct: the complement of the top-(t+1) stays under ct.
    no_disjoint_quorums: no two disjoint subsets both exceed ct.
    """

    n: int
    t: int
    survivor_quorums_ok: bool
    non_cabinet_below_ct: bool
    no_disjoint_quorums: bool
    witness_small_survivor: tuple[int, ...] | None = None
    witness_disjoint: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    @property
    def ok(self) -> bool:
        return self.survivor_quorums_ok and self.non_cabinet_below_ct and self.no_disjoint_quorums


def exhaustive_scheme_check(weights, ct: float, t: int) -> ExhaustiveReport:
    """Enumerate subsets (exact arithmetic) and check the quorum laws.

    Node positions are reported 1-based in descending-weight order.
    """
    n = len(weights)
    if n > EXHAUSTIVE_MAX_N:
        raise TooLargeError(f"n={n} exceeds enumeration cap {EXHAUSTIVE_MAX_N}")
    ws = _scaled(sorted(weights, reverse=True))
    ct2 = 2 * round(ct * 10**SCALE_DIGITS)
    total = sum(ws)

    survivor_ok = True
    witness_survivor = None
    for combo in itertools.combinations(range(n), n - t):
        if 2 * sum(ws[i] for i in combo) <= ct2:
            survivor_ok = False
            witness_survivor = tuple(i + 1 for i in combo)
            break

    non_cabinet = sum(ws[t + 1 :])
    non_cabinet_ok = 2 * non_cabinet < ct2

    disjoint_ok = True
    witness_disjoint = None
    for size in range(1, n):
        for combo in itertools.combinations(range(n), size):
            s = sum(ws[i] for i in combo)
            if 2 * s > ct2 and 2 * (total - s) > ct2:
                rest = tuple(i + 1 for i in range(n) if i not in combo)
                disjoint_ok = False
                witness_disjoint = (tuple(i + 1 for i in combo), rest)
                break
        if not disjoint_ok:
            break

    return ExhaustiveReport(
        n=n,
        t=t,
        survivor_quorums_ok=survivor_ok,
        non_cabinet_below_ct=non_cabinet_ok,
        no_disjoint_quorums=disjoint_ok,
        witness_small_survivor=witness_survivor,
        witness_disjoint=witness_disjoint,
    )


def triage_scheme(weights, ct: float, t: int) -> tuple[str, SchemeVerdict, ExhaustiveReport]:
    """Classify a scheme as "valid", "safety", or "liveness" failure.

    Combines the analytic verdict with the exhaustive enumeration: a
    threshold that admits disjoint quorums is a safety failure even when
    the analytic check stops earlier at a ct mismatch.
    """
    verdict = validate_scheme(weights, ct, t)
    report = exhaustive_scheme_check(weights, ct, t)
    if verdict.valid and report.ok:
        return "valid", verdict, report
    if not report.no_disjoint_quorums or verdict.violated is Violation.SAFETY:
        return "safety", verdict, report
    if not report.survivor_quorums_ok or verdict.violated is Violation.LIVENESS:
        return "liveness", verdict, report
    return verdict.violated.value, verdict, report


def commit_time_oracle(leader_weight: float, follower_weights: dict[int, float],
                       rtts: dict[int, float], ct: float) -> float:
    """Commit instant predicted from round-trip order statistics.

    Sorts followers by round-trip time (node id breaks ties, matching the
    reply queue) and returns the arrival time of the shortest prefix whose
    weights, plus the leader's, exceed ct.  Missing round trips are
    treated as never arriving.
    """
    acc = leader_weight
    order = sorted(follower_weights, key=lambda nid: (rtts.get(nid, float("inf")), nid))
    for nid in order:
        rtt = rtts.get(nid)
        if rtt is None:
            break
        acc += follower_weights[nid]
        if acc > ct:
            return rtt
    raise InfeasibleQuorumError(f"surviving weight {acc} never exceeds ct={ct}")


def expected_commit_times(trace: ExecutionTrace) -> list[tuple[int, float, float]]:
    """(wclock, simulated, predicted) commit latencies for committed rounds.

    The prediction feeds each round's realized reply round-trips into the
    order-statistic oracle; with static delays and no failures the two
    columns must match exactly.
    """
    assignments = trace.assignments_by_wclock()
    out = []
    for stats in trace.committed_rounds():
        assign = assignments.get(stats.wclock)
        if assign is None:  # baseline runs carry no assignments
            assign = {nid: 1.0 for nid in range(1, trace.n + 1)}
            ct = trace.n / 2
        else:
            ct = sum(assign.values()) / 2
        rtts = {
            nid: t - stats.start_time
            for t, nid, _ in trace.reply_arrivals(stats.wclock)
        }
        followers = {nid: w for nid, w in assign.items() if nid != stats.leader_id}
        predicted = commit_time_oracle(assign[stats.leader_id], followers, rtts, ct)
        out.append((stats.wclock, stats.commit_latency_ms, predicted))
    return out


@dataclass(frozen=True)
class AuditViolation:
    kind: str
    detail: str
    time: float = 0.0


def audit_trace(trace: ExecutionTrace) -> list[AuditViolation]:
    """Scan a complete trace for safety violations.

    Checks divergent commits, dual leaders in a term, elected leaders
    missing committed entries, per-node weight-clock regressions, and
    weight-multiset breaks in any round.  An empty list means clean.
    """
    violations: list[AuditViolation] = []

    # Divergent commits: every commit of an index must agree on (term, wclock).
    seen: dict[int, tuple[int, int]] = {}
    first_commit_time: dict[int, float] = {}
    commit_records = sorted(trace.of_kind("commit"), key=lambda r: (r.time, r.index))
    for rec in commit_records:
        ident = (rec.term, rec.wclock)
        if rec.index in seen:
            if seen[rec.index] != ident:
                violations.append(AuditViolation(
                    "divergent_commit",
                    f"index {rec.index}: {seen[rec.index]} vs {ident} at node {rec.frm}",
                    rec.time,
                ))
        else:
            seen[rec.index] = ident
            first_commit_time[rec.index] = rec.time

    # At most one leader per term.
    leaders_by_term: dict[int, set[int]] = {}
    for rec in trace.of_kind("role"):
        if rec.extra and rec.extra.get("role") == "leader":
            leaders_by_term.setdefault(rec.term, set()).add(rec.frm)
    for term, ids in sorted(leaders_by_term.items()):
        if len(ids) > 1:
            violations.append(AuditViolation(
                "dual_leader", f"term {term} has leaders {sorted(ids)}"
            ))

    # An elected leader must hold every entry committed before its election.
    for rec in trace.of_kind("role"):
        if not (rec.extra and rec.extra.get("role") == "leader"):
            continue
        log = {idx: term for idx, term in rec.extra.get("log", [])}
        for idx, committed_at in first_commit_time.items():
            if committed_at < rec.time:
                expected_term = seen[idx][0]
                if log.get(idx) != expected_term:
                    violations.append(AuditViolation(
                        "stale_elected_leader",
                        f"leader {rec.frm} (term {rec.term}) missing committed entry "
                        f"{idx} (term {expected_term})",
                        rec.time,
                    ))

    # Weight clocks strictly increase along each node's committed rounds.
    last_wclock: dict[int, int] = {}
    for rec in commit_records:
        prev = last_wclock.get(rec.frm)
        if prev is not None and rec.wclock <= prev:
            violations.append(AuditViolation(
                "wclock_regression",
                f"node {rec.frm} committed wclock {rec.wclock} after {prev}",
                rec.time,
            ))
        last_wclock[rec.frm] = rec.wclock

    # Each round's assignment must be exactly the scheme's weight multiset.
    if trace.schemes:
        epoch_by_wclock: dict[int, int] = {}
        for rec in trace.of_kind("assign"):
            if rec.extra:
                epoch_by_wclock[rec.wclock] = rec.extra.get("epoch", 0)
        for wclock, assign in sorted(trace.assignments_by_wclock().items()):
            epoch = epoch_by_wclock.get(wclock, 0)
            expected = sorted(trace.schemes.get(epoch, ()))
            got = sorted(assign.values())
            if expected and got != expected:
                violations.append(AuditViolation(
                    "weight_multiset",
                    f"wclock {wclock} assignment {got} != scheme {expected}",
                ))
            if len(assign) != trace.n:
                violations.append(AuditViolation(
                    "weight_multiset",
                    f"wclock {wclock} assigned {len(assign)} of {trace.n} nodes",
                ))

    return violations
