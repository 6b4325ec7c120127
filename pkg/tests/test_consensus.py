"""Node state machine: rounds, weight reassignment, elections, reads."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cabinet.consensus import (
    Algo,
    AppendEntriesMsg,
    AppendReply,
    ClusterConfig,
    ConflictingConfirmations,
    LogEntry,
    Node,
    NotLeaderError,
    Role,
    RoundInFlightError,
    RoundNotOpenError,
    RoundStatus,
    VoteRequest,
    WeightQueue,
    weighted_read,
)
from cabinet.weights import BadThresholdError, WeightScheme, generate_scheme

SEVEN_WEIGHTS = (12.0, 10.0, 8.0, 6.0, 4.0, 3.0, 2.0)


def seven_node_config(**kw):
    scheme = WeightScheme(n=7, t=2, ratio=None, weights=SEVEN_WEIGHTS, ct=22.5)
    return ClusterConfig(n=7, t=2, scheme=scheme, **kw)


def make_cluster(config):
    ids = range(1, config.n + 1)
    return {i: Node(i, config, ids) for i in ids}


def fresh_leader(config, leader_id=1):
    nodes = make_cluster(config)
    leader = nodes[leader_id]
    leader.current_term = 1
    leader.become_leader()
    return nodes, leader


def drive_reply(leader, follower, msg, now=0.0):
    reply = follower.handle_append_entries(msg, now)
    return leader.on_append_reply(reply, now)


class TestStartRound:
    def test_initial_assignment_descends_by_id(self):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = leader.start_round("batch-1", now=0.0)
        assert len(msgs) == 6
        assert leader.round_wclock == 1
        by_dest = dict(zip(leader.peers, msgs))
        assert by_dest[2].weight == 10.0
        assert by_dest[7].weight == 2.0
        assert leader.acc_weight == 12.0
        assert len(leader.weight_queue) == 0

    def test_smallest_cluster(self):
        scheme = generate_scheme(3, 1)
        config = ClusterConfig(n=3, t=1, scheme=scheme)
        nodes, leader = fresh_leader(config)
        msgs = leader.start_round("b", now=0.0)
        assert len(msgs) == 2
        assert {m.weight for m in msgs} == {scheme.weights[1], scheme.weights[2]}

    def test_swapped_weights_after_slow_cabinet_member(self):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = leader.start_round("b1", now=0.0)
        by_dest = dict(zip(leader.peers, msgs))
        # n4 replies before n3
        for fid, at in [(2, 1.0), (4, 2.0), (3, 3.0), (5, 4.0), (6, 5.0), (7, 6.0)]:
            drive_reply(leader, nodes[fid], by_dest[fid], now=at)
        leader.finalize_round(7.0)
        assert leader.assignment[4] == 8.0
        assert leader.assignment[3] == 6.0
        msgs = leader.start_round("b2", now=8.0)
        by_dest = dict(zip(leader.peers, msgs))
        assert by_dest[4].weight == 8.0
        assert by_dest[3].weight == 6.0

    def test_not_leader_and_round_in_flight(self):
        nodes, leader = fresh_leader(seven_node_config())
        with pytest.raises(NotLeaderError):
            nodes[2].start_round("b")
        leader.start_round("b")
        with pytest.raises(RoundInFlightError):
            leader.start_round("b2")


class TestOnAppendReply:
    def test_commits_after_two_cabinet_replies(self):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        out = drive_reply(leader, nodes[2], msgs[2], 1.0)
        assert out.status is RoundStatus.PENDING
        assert leader.acc_weight == 22.0
        out = drive_reply(leader, nodes[3], msgs[3], 2.0)
        assert out.status is RoundStatus.COMMITTED and out.committed_now
        assert leader.acc_weight == 30.0
        assert leader.round_replies_at_commit == 2
        assert leader.commit_index == 1

    def test_commit_with_two_cabinet_members_crashed(self):
        # weights after one swap: n2=10, n4=8 dead; survivors reply slowest-cabinet-last
        nodes, leader = fresh_leader(seven_node_config())
        leader.assignment = {1: 12.0, 2: 10.0, 4: 8.0, 3: 6.0, 5: 4.0, 6: 3.0, 7: 2.0}
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        sums = []
        for fid, at in [(5, 1.0), (6, 2.0), (7, 3.0), (3, 4.0)]:
            out = drive_reply(leader, nodes[fid], msgs[fid], at)
            sums.append(leader.acc_weight)
        assert sums == [16.0, 19.0, 21.0, 27.0]
        assert out.committed_now
        assert leader.round_replies_at_commit == 4

    def test_baseline_commits_on_majority_count(self):
        config = ClusterConfig(n=7, t=2, scheme=None, algo=Algo.BASELINE)
        nodes, leader = fresh_leader(config)
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        outs = [drive_reply(leader, nodes[f], msgs[f], float(f)) for f in (2, 3, 4)]
        assert [o.status for o in outs[:2]] == [RoundStatus.PENDING, RoundStatus.PENDING]
        assert outs[2].committed_now
        assert leader.round_replies_at_commit == 3  # floor(7/2)+1 nodes incl. leader

    def test_stale_and_duplicate_replies_ignored(self):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        reply = nodes[2].handle_append_entries(msgs[2], 1.0)
        leader.on_append_reply(reply, 1.0)
        dup = leader.on_append_reply(reply, 2.0)
        assert dup.ignored == "duplicate_reply"
        assert leader.acc_weight == 22.0
        stale = AppendReply(term=1, from_id=3, success=True, acked_index=1,
                            echoed_wclock=0, echoed_weight=8.0)
        out = leader.on_append_reply(stale, 3.0)
        assert out.ignored == "stale_wclock"
        assert leader.acc_weight == 22.0


class TestFinalizeRound:
    def run_round(self, leader, nodes, arrival):
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        for at, fid in arrival:
            drive_reply(leader, nodes[fid], msgs[fid], at)
        return leader.finalize_round(100.0)

    def test_identical_reply_order_keeps_cabinet(self):
        nodes, leader = fresh_leader(seven_node_config())
        before = dict(leader.assignment)
        after = self.run_round(leader, nodes, [(float(f), f) for f in range(2, 8)])
        assert after == before

    def test_silent_node_gets_lowest_remaining_weight(self):
        nodes, leader = fresh_leader(seven_node_config())
        after = self.run_round(
            leader, nodes, [(1.0, 2), (2.0, 4), (3.0, 5), (4.0, 6), (5.0, 7)]
        )
        assert after[3] == 2.0  # only non-replier takes the bottom weight
        assert after[2] == 10.0 and after[4] == 8.0

    def test_silent_nodes_ranked_by_previous_weight_then_id(self):
        nodes, leader = fresh_leader(seven_node_config())
        # n2 (prev 10) and n3 (prev 8) never reply: n2 outranks n3 in the dregs
        after = self.run_round(leader, nodes, [(1.0, 4), (2.0, 5), (3.0, 6), (4.0, 7)])
        assert after[4] == 10.0 and after[5] == 8.0 and after[6] == 6.0 and after[7] == 4.0
        assert after[2] == 3.0 and after[3] == 2.0

    def test_crashed_cabinet_replaced_by_fastest_survivors(self):
        nodes, leader = fresh_leader(seven_node_config())
        leader.assignment = {1: 12.0, 2: 10.0, 4: 8.0, 3: 6.0, 5: 4.0, 6: 3.0, 7: 2.0}
        after = self.run_round(leader, nodes, [(1.0, 5), (2.0, 6), (3.0, 7), (4.0, 3)])
        assert leader.cabinet_ids() == (1, 5, 6)
        assert after[5] == 10.0 and after[6] == 8.0
        # dead n2 (prev 10) outranks dead n4 (prev 8) for the leftovers
        assert after[2] == 3.0 and after[4] == 2.0

    def test_weight_conservation(self):
        nodes, leader = fresh_leader(seven_node_config())
        after = self.run_round(leader, nodes, [(1.0, 7), (1.0, 5), (2.0, 2)])
        assert sorted(after.values()) == sorted(SEVEN_WEIGHTS)

    def test_equal_arrival_times_break_ties_by_node_id(self):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        for fid in (7, 5, 6, 2, 3, 4):  # same instant, scrambled processing order
            drive_reply(leader, nodes[fid], msgs[fid], 4.0)
        after = leader.finalize_round(5.0)
        assert after == {1: 12.0, 2: 10.0, 3: 8.0, 4: 6.0, 5: 4.0, 6: 3.0, 7: 2.0}


class TestHandleAppendEntries:
    def test_stores_weight_state_and_echoes(self):
        nodes, leader = fresh_leader(seven_node_config())
        follower = nodes[2]
        msg = AppendEntriesMsg(term=1, leader_id=1, prev_index=0, prev_term=0,
                               entries=(LogEntry(1, 1, 5, "b", 12.0),),
                               leader_commit=0, wclock=5, weight=8.0)
        reply = follower.handle_append_entries(msg, 1.0)
        assert reply.success
        assert follower.weight_state == (5, 8.0)
        assert reply.echoed_wclock == 5 and reply.echoed_weight == 8.0
        assert follower.log[0].committed_weight == 8.0

    def test_lower_term_rejected_with_higher_term(self):
        nodes, _ = fresh_leader(seven_node_config())
        follower = nodes[2]
        follower.current_term = 9
        msg = AppendEntriesMsg(term=3, leader_id=1, prev_index=0, prev_term=0,
                               entries=(), leader_commit=0, wclock=1, weight=10.0)
        reply = follower.handle_append_entries(msg, 0.0)
        assert not reply.success and reply.term == 9

    def test_prev_index_mismatch_fails_then_repair_succeeds(self):
        nodes, leader = fresh_leader(seven_node_config())
        follower = nodes[2]
        leader.log.append(LogEntry(1, 1, 1, "old", 12.0))
        leader.max_wclock = 1
        for fid in leader.peers:
            leader.next_index[fid] = 2
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        out = drive_reply(leader, follower, msgs[2], 1.0)
        assert out.resend is not None
        assert out.resend.prev_index == 0  # backed off to the log start
        assert 2 not in leader.weight_queue
        out = drive_reply(leader, follower, out.resend, 2.0)
        assert out.resend is None
        assert 2 in leader.weight_queue
        assert follower.log[-1].batch == "b"


class TestElections:
    def test_cabinet_needs_n_minus_t_votes(self):
        scheme = generate_scheme(5, 1)
        config = ClusterConfig(n=5, t=1, scheme=scheme)
        assert config.election_quorum == 4

    def test_baseline_needs_majority(self):
        config = ClusterConfig(n=5, t=1, scheme=None, algo=Algo.BASELINE)
        assert config.election_quorum == 3

    def test_vote_counting_and_win(self):
        scheme = generate_scheme(5, 1)
        config = ClusterConfig(n=5, t=1, scheme=scheme)
        nodes = make_cluster(config)
        candidate = nodes[2]
        candidate.start_election(0.0)
        assert candidate.role is Role.CANDIDATE
        replies = [nodes[i].handle_vote_request(
            VoteRequest(candidate.current_term, 2, 0, 0)) for i in (1, 3, 4)]
        assert all(r.granted for r in replies)
        for r in replies[:2]:
            assert candidate.on_vote_reply(r) is False
        assert candidate.on_vote_reply(replies[2]) is True
        assert candidate.role is Role.LEADER

    def test_split_vote_retries_with_higher_term(self):
        scheme = generate_scheme(5, 1)
        config = ClusterConfig(n=5, t=1, scheme=scheme)
        nodes = make_cluster(config)
        nodes[2].start_election(0.0)
        nodes[3].start_election(0.0)
        term = nodes[2].current_term
        # each votes for itself; neither can reach 4 grants
        assert nodes[3].handle_vote_request(VoteRequest(term, 2, 0, 0)).granted is False
        nodes[2].start_election(1.0)
        assert nodes[2].current_term == term + 1

    def test_voting_rules(self):
        scheme = generate_scheme(5, 1)
        config = ClusterConfig(n=5, t=1, scheme=scheme)
        nodes = make_cluster(config)
        voter = nodes[1]
        voter.log.append(LogEntry(1, 1, 1, "b", 1.0))
        behind = VoteRequest(term=2, candidate_id=3, last_log_index=0, last_log_term=0)
        assert voter.handle_vote_request(behind).granted is False
        ahead = VoteRequest(term=2, candidate_id=4, last_log_index=2, last_log_term=1)
        assert voter.handle_vote_request(ahead).granted is True
        again = VoteRequest(term=2, candidate_id=5, last_log_index=2, last_log_term=1)
        assert voter.handle_vote_request(again).granted is False  # vote spent

    def test_only_fully_replicated_node_can_win(self):
        # five nodes, threshold 1: logs 5,5,3,3,2 entries; only the complete
        # log can collect the n-t = 4 votes needed
        scheme = generate_scheme(5, 1)
        config = ClusterConfig(n=5, t=1, scheme=scheme)
        nodes = make_cluster(config)
        lengths = {1: 5, 2: 5, 3: 3, 4: 3, 5: 2}
        for nid, length in lengths.items():
            nodes[nid].log = [LogEntry(i, 1, i, f"b{i}", 1.0) for i in range(1, length + 1)]
        # node 1 (old leader) has failed; try every candidate
        def votes_for(candidate_id, term):
            cand = nodes[candidate_id]
            cand.current_term = term - 1
            cand.start_election(0.0)
            req = VoteRequest(term, candidate_id, cand.last_log_index(), cand.last_log_term())
            granted = 1
            for nid in (2, 3, 4, 5):
                if nid != candidate_id:
                    granted += nodes[nid].handle_vote_request(req).granted
            return granted

        assert votes_for(2, 2) >= 4
        for nid in (3, 4, 5):
            assert votes_for(nid, nid + 10) < 4


class TestBecomeLeader:
    def test_fresh_cluster_assignment(self):
        nodes, leader = fresh_leader(seven_node_config())
        assert leader.assignment == {1: 12.0, 2: 10.0, 3: 8.0, 4: 6.0, 5: 4.0, 6: 3.0, 7: 2.0}
        assert leader.cabinet_ids() == (1, 2, 3)

    def test_wclock_resumes_above_log_maximum(self):
        nodes, _ = fresh_leader(seven_node_config())
        node = nodes[3]
        node.log = [LogEntry(1, 1, 41, "b", 2.0)]
        node.max_wclock = 41
        node.current_term = 2
        node.become_leader()
        msgs = node.start_round("b2", 0.0)
        assert msgs[0].wclock == 42

    def test_baseline_leader_has_unit_weights(self):
        config = ClusterConfig(n=5, t=1, scheme=None, algo=Algo.BASELINE)
        nodes, leader = fresh_leader(config)
        assert set(leader.assignment.values()) == {1.0}
        assert leader.cabinet_ids() == ()


class TestReconfigureThreshold:
    def test_config_round_commits_under_new_threshold(self):
        scheme = generate_scheme(10, 4)
        config = ClusterConfig(n=10, t=4, scheme=scheme)
        nodes, leader = fresh_leader(config)
        msgs = dict(zip(leader.peers, leader.reconfigure_threshold(2, 0.0)))
        new_ct = leader.round_ct
        assert new_ct != scheme.ct
        assert leader.pending_config.t == 2
        replies = 0
        for fid in leader.peers:
            replies += 1
            out = drive_reply(leader, nodes[fid], msgs[fid], float(replies))
            if out.committed_now:
                break
        assert leader.config.t == 2
        assert leader.config.epoch == 1
        assert nodes[2].config.t == 2  # adopted on append
        leader.finalize_round(50.0)
        assert sorted(leader.assignment.values()) == sorted(leader.config.scheme.weights)

    def test_same_threshold_still_bumps_epoch(self):
        scheme = generate_scheme(10, 3)
        config = ClusterConfig(n=10, t=3, scheme=scheme)
        nodes, leader = fresh_leader(config)
        msgs = dict(zip(leader.peers, leader.reconfigure_threshold(3, 0.0)))
        for fid in leader.peers:
            if drive_reply(leader, nodes[fid], msgs[fid], 1.0).committed_now:
                break
        assert leader.config.epoch == 1
        assert leader.config.t == 3

    def test_rejects_out_of_range_threshold(self):
        scheme = generate_scheme(10, 3)
        config = ClusterConfig(n=10, t=3, scheme=scheme)
        nodes, leader = fresh_leader(config)
        with pytest.raises(BadThresholdError):
            leader.reconfigure_threshold(0)
        with pytest.raises(BadThresholdError):
            leader.reconfigure_threshold(5)
        with pytest.raises(NotLeaderError):
            nodes[2].reconfigure_threshold(2)


class TestWeightedRead:
    def test_confirmed_by_cabinet_weights(self):
        result = weighted_read([("v", 12.0), ("v", 10.0), ("v", 8.0)], 22.5)
        assert result.confirmed and result.value == "v"

    def test_insufficient_weights(self):
        result = weighted_read([("v", 6.0), ("v", 4.0), ("v", 3.0), ("v", 2.0)], 22.5)
        assert not result.confirmed

    def test_empty_replies(self):
        assert not weighted_read([], 22.5).confirmed

    def test_conflicting_confirmations_raise(self):
        with pytest.raises(ConflictingConfirmations):
            weighted_read([("a", 30.0), ("b", 25.0)], 22.5)


class TestInvariants:
    @given(st.permutations(list(range(2, 8))), st.data())
    @settings(max_examples=60, deadline=None)
    def test_earlier_reply_earns_higher_next_weight(self, order, data):
        nodes, leader = fresh_leader(seven_node_config())
        msgs = dict(zip(leader.peers, leader.start_round("b", 0.0)))
        replied = []
        now = 0.0
        for fid in order:
            now += data.draw(st.floats(min_value=0.0, max_value=2.0))
            if data.draw(st.booleans()):
                drive_reply(leader, nodes[fid], msgs[fid], now)
                replied.append((now, fid))
        after = leader.finalize_round(now + 1.0)
        assert sorted(after.values()) == sorted(SEVEN_WEIGHTS)
        queue = leader.weight_queue.node_order()
        for a, b in zip(queue, queue[1:]):
            assert after[a] > after[b]
        for silent in set(range(2, 8)) - set(queue):
            assert all(after[silent] < after[r] for r in queue)

    def test_no_reassignment_without_commit(self):
        # a deposed leader's open round leaves the next-round weights untouched
        nodes, leader = fresh_leader(seven_node_config())
        before = dict(leader.assignment)
        leader.start_round("b", 0.0)
        newer = AppendReply(term=5, from_id=2, success=False, acked_index=0,
                            echoed_wclock=1, echoed_weight=10.0)
        leader.on_append_reply(newer, 1.0)
        assert leader.role is Role.FOLLOWER
        assert not leader.round_open
        assert leader.assignment == before
        with pytest.raises(RoundNotOpenError):
            leader.finalize_round(2.0)


class TestWeightQueue:
    def test_fifo_with_id_tiebreak(self):
        q = WeightQueue()
        q.push(1.0, 5, 4.0)
        q.push(2.0, 7, 2.0)
        q.push(2.0, 3, 8.0)  # same instant as node 7: id order wins
        q.push(3.0, 2, 10.0)
        assert q.node_order() == [5, 3, 7, 2]

    def test_rejects_duplicates(self):
        q = WeightQueue()
        q.push(1.0, 5, 4.0)
        with pytest.raises(ValueError):
            q.push(2.0, 5, 4.0)
