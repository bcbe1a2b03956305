import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pale.plist import ParticipantList, PLEntry


def _pl(*ranks):
    return ParticipantList([PLEntry(i, r, 0, 0.0) for i, r in enumerate(ranks)])


def test_peek_best_examples():
    assert _pl(0.2, 0.9, 0.5).peek_best().rank == 0.9
    pl = ParticipantList([PLEntry("a", 0.5, 0, 0.0), PLEntry("b", 0.5, 0, 0.0)])
    assert pl.peek_best().id == "b"
    solo = ParticipantList([PLEntry("me", 0.1, 0, 0.0)])
    assert solo.peek_best().id == "me"


def test_peek_best_empty():
    with pytest.raises(IndexError):
        ParticipantList().peek_best()


def test_insert_or_update_examples():
    pl = _pl(0.1, 0.2, 0.3)
    pl.insert_or_update(PLEntry(9, 0.05, 0, 0.0))
    assert len(pl) == 4

    pl = _pl(0.3, 0.5, 0.6)
    pl.insert_or_update(PLEntry(0, 0.8, 0, 0.0))
    assert len(pl) == 3 and pl.peek_best().id == 0

    pl = ParticipantList([PLEntry("x", 0.9, 3, 1.0), PLEntry("y", 0.2, 0, 1.0)])
    pl.insert_or_update(PLEntry("x", 0.9, 4, 2.0))
    assert pl.peek_best().id == "x"
    assert pl.get("x").round == 4


def test_delete_best_examples():
    pl = _pl(0.9, 0.5)
    pl.delete_best()
    assert [e.rank for e in pl] == [0.5]
    pl.delete_best()
    assert len(pl) == 0
    with pytest.raises(IndexError):
        pl.delete_best()


def test_get():
    pl = _pl(0.4, 0.7)
    assert pl.get(1) == PLEntry(1, 0.7, 0, 0.0)
    assert pl.get(5) is None
    assert 1 in pl and 5 not in pl


def test_leader_tie_orders_infinite_ranks():
    pl = ParticipantList([PLEntry("a", math.inf, 4, 0.0, (0.9, 4, "a")),
                          PLEntry("b", math.inf, 4, 0.0, (0.7, 9, "b")),
                          PLEntry("c", 0.99, 2, 0.0)])
    assert pl.peek_best().id == "a"


ops = st.lists(
    st.one_of(
        st.tuples(st.just("put"), st.integers(0, 7), st.sampled_from([0.1, 0.25, 0.5, 0.75, 1.0, math.inf]),
                  st.integers(0, 5)),
        st.tuples(st.just("pop")),
        st.tuples(st.just("remove"), st.integers(0, 7)),
    ),
    max_size=80,
)


@settings(max_examples=300, deadline=None)
@given(ops)
def test_matches_sorted_list_model(seq):
    pl = ParticipantList()
    model: dict = {}
    for op in seq:
        if op[0] == "put":
            _, ident, rank, rnd = op
            tie = (rank, rnd, ident) if math.isinf(rank) else None
            e = PLEntry(ident, rank, rnd, float(rnd), tie)
            pl.insert_or_update(e)
            model[ident] = e
        elif op[0] == "pop":
            if not model:
                continue
            top = max(model.values(), key=lambda e: e.key)
            assert pl.peek_best() == top
            pl.delete_best()
            del model[top.id]
        elif op[1] in model:
            pl.remove(op[1])
            del model[op[1]]
        assert len(pl) == len(model)
        expected = sorted(model.values(), key=lambda e: e.key, reverse=True)
        assert list(pl) == expected
        if model:
            assert pl.peek_best() == expected[0]
    drained = []
    while len(pl):
        drained.append(pl.peek_best())
        pl.delete_best()
    assert drained == sorted(model.values(), key=lambda e: e.key, reverse=True)
