import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pale.oracle import NaiveNode
from pale.protocol import (INFINITY, BecameLeader, BeepMsg, Broadcast, ConfigError,
                           Handshake, NodeParams, Rejected, compute_rank, init_node,
                           on_beep_received, on_round_timer, phys_score_from_components)


def test_compute_rank_examples():
    assert compute_rank(0.05, 0, 0.75) == 0.75
    assert compute_rank(0.05, 4, 0.6) == pytest.approx(0.8)
    phys = phys_score_from_components(7.9, 7.9, 7.9)
    assert phys == 1.0
    assert compute_rank(0.05, 0, phys) == 1.0


def test_phys_score_uses_weakest_component():
    assert phys_score_from_components(7.9, 3.95, 6.0) == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        phys_score_from_components(0.5, 3.0, 3.0)


def test_params_validation():
    assert NodeParams(max_ratio=1).max_round == 4
    assert NodeParams(max_ratio=1.5).max_round == 6
    with pytest.raises(ConfigError):
        NodeParams(w=0)
    with pytest.raises(ConfigError):
        NodeParams(max_ratio=0.9)


def test_init_node():
    state, actions = init_node(NodeParams(w=0.05, phys_score=0.75), "a", 10.0)
    assert state.rank == 0.75
    assert state.cnt_rounds == 0 and not state.iam_leader
    assert [e.id for e in state.pl] == ["a"]
    assert actions == [Broadcast(BeepMsg(10.0, 0.75, "a", 0), 1)]


def _lonely(max_ratio=1.0):
    state, _ = init_node(NodeParams(max_ratio=max_ratio, phys_score=0.5), 1, 0.0)
    return state


def test_single_node_leads_at_max_round():
    state = _lonely()
    for t in range(1, 4):
        _, actions = on_round_timer(state, float(t))
        assert not any(isinstance(a, BecameLeader) for a in actions)
    assert state.rounds_as_leading == 3
    _, actions = on_round_timer(state, 4.0)
    assert state.iam_leader and state.rank == INFINITY
    assert isinstance(actions[0], BecameLeader)
    assert actions[0].rounds_as_leading == 4
    assert actions[0].tie == (0.5, 4, 1)
    assert isinstance(actions[1], Broadcast) and actions[1].msg.rank == INFINITY


def test_leader_always_beeps_once():
    state = _lonely()
    for t in range(1, 5):
        on_round_timer(state, float(t))
    for t in range(5, 9):
        _, actions = on_round_timer(state, float(t))
        assert len(actions) == 1 and actions[0].msg.rank == INFINITY
        assert actions[0].msg.tie == state.tie
    assert state.iam_leader


def test_stale_best_is_dropped():
    state, _ = init_node(NodeParams(w=0.05, phys_score=0.5), 1, 0.0)
    on_beep_received(state, BeepMsg(0.0, 0.9, 2, 1), 0.5)
    assert state.best.id == 2
    on_round_timer(state, 1.0)
    assert state.best.id == 2
    _, actions = on_round_timer(state, 2.0)   # cnt - lastLeadMsg = 2 > ceil(1)
    assert 2 not in state.pl
    assert state.pl0_del_cnt == 1
    assert state.rank == pytest.approx(0.55)
    assert state.rounds_as_leading == 1
    assert isinstance(actions[0], Broadcast)


def test_follower_is_silent():
    state, _ = init_node(NodeParams(phys_score=0.5), 1, 0.0)
    on_beep_received(state, BeepMsg(0.0, 0.9, 2, 0), 0.0)
    _, actions = on_round_timer(state, 1.0)
    assert actions == []


def test_stronger_beep_resets_leading_rounds():
    state, _ = init_node(NodeParams(phys_score=0.6), 1, 0.0)
    on_round_timer(state, 1.0)
    on_round_timer(state, 2.0)
    assert state.rounds_as_leading == 2
    on_beep_received(state, BeepMsg(1.5, 0.9, 2, 0), 2.5)
    assert state.rounds_as_leading == 0 and state.best.id == 2


def test_handshake_at_max_round_once():
    state, _ = init_node(NodeParams(phys_score=0.1), 1, 0.0)
    _, actions = on_beep_received(state, BeepMsg(0.0, 0.9, 2, 3), 0.0)
    assert actions == []
    _, actions = on_beep_received(state, BeepMsg(1.0, INFINITY, 2, 4, (0.9, 4, 2)), 1.0)
    assert actions == [Handshake(2)]
    _, actions = on_beep_received(state, BeepMsg(2.0, INFINITY, 2, 4, (0.9, 4, 2)), 2.0)
    assert actions == []


def test_restarted_sender_detected():
    state, _ = init_node(NodeParams(w=0.05, phys_score=0.1), 1, 0.0)
    on_beep_received(state, BeepMsg(100.0, 0.9, "v", 5), 100.0)
    on_beep_received(state, BeepMsg(250.0, 0.9, "v", 0), 250.0)
    assert state.pl0_del_cnt == 1
    assert state.pl.get("v").round == 0
    assert state.rank == pytest.approx(0.15)


@pytest.mark.parametrize("bad", [BeepMsg(0.0, 0.5, None, 0), BeepMsg(0.0, 0.5, 2, -1),
                                 BeepMsg(0.0, 0.5, 1, 0), "noise"])
def test_malformed_beep_rejected(bad):
    state, _ = init_node(NodeParams(phys_score=0.4), 1, 0.0)
    before = state.digest()
    _, actions = on_beep_received(state, bad, 0.0)
    assert len(actions) == 1 and isinstance(actions[0], Rejected)
    assert state.digest() == before


# -- randomized comparison with the naive node ------------------------------

RANKS = [0.1, 0.3, 0.5, 0.55, 0.9]

beep = st.tuples(st.just("beep"), st.integers(2, 4), st.sampled_from(RANKS + [math.inf]),
                 st.integers(0, 6), st.integers(0, 3))
events = st.lists(st.one_of(st.tuples(st.just("timer")), beep), max_size=200)


def _msg(sender, rank, rnd, back, now):
    tie = (0.9, 4, sender) if math.isinf(rank) else None
    return BeepMsg(float(now - back), rank, sender, rnd, tie)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([0.05, 0.25]),
       st.sampled_from([0.2, 0.5, 0.95]), events)
def test_matches_naive_node(ratio, w, phys, seq):
    params = NodeParams(w=w, max_ratio=ratio, phys_score=phys)
    state, actions = init_node(params, 1, 0.0)
    ref = NaiveNode(1, w, ratio, phys, 0.0)
    assert state.digest() == ref.digest()
    was_leader, deletions = False, 0
    for step, ev in enumerate(seq, start=1):
        now = float(step)
        if ev[0] == "timer":
            _, actions = on_round_timer(state, now)
            sent = ref.timer(now)
            beeps = [a.msg for a in actions if isinstance(a, Broadcast)]
            assert [(m.time, m.rank, m.id, m.round, m.tie) for m in beeps] == \
                [(m["time"], m["rank"], m["id"], m["round"], m["tie"]) for m in sent]
            if not state.iam_leader and state.best.id != 1:
                assert beeps == []
            if was_leader:
                assert len(beeps) == 1 and beeps[0].rank == INFINITY
            for a in actions:
                if isinstance(a, BecameLeader):
                    assert a.rounds_as_leading == params.max_round
        else:
            _, sender, rank, rnd, back = ev
            msg = _msg(sender, rank, rnd, back, now)
            _, actions = on_beep_received(state, msg, now)
            target = ref.beep({"time": msg.time, "rank": msg.rank, "id": msg.id,
                               "round": msg.round, "tie": msg.tie}, now)
            shakes = [a.target for a in actions if isinstance(a, Handshake)]
            assert shakes == ([] if target is None else [target])
            for t in shakes:
                assert state.pl.get(t).round >= params.max_round
        assert state.digest() == ref.digest()
        # state invariants
        assert state.rounds_as_leading <= params.max_round
        assert state.last_lead_msg <= state.cnt_rounds
        assert 1 in state.pl
        if not state.iam_leader:
            assert state.rank == pytest.approx(compute_rank(w, state.pl0_del_cnt, phys))
        assert state.iam_leader or not was_leader
        assert state.pl0_del_cnt >= deletions
        was_leader, deletions = state.iam_leader, state.pl0_del_cnt
