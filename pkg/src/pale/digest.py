"""Canonical state digest shared by the node state machine and the replay oracle."""

import hashlib


def digest(entries, cnt_rounds, rounds_as_leading, pl0_del_cnt, last_lead_msg,
           iam_leader, rank, link) -> str:
    """Hash a node state given as plain values.

    ``entries`` must already be in descending participant-list order, each
    an ``(id, rank, round, time, tie)`` tuple.
    """
    canon = (
        tuple((e[0], float(e[1]), int(e[2]), float(e[3]),
               tuple(e[4]) if e[4] is not None else None) for e in entries),
        int(cnt_rounds), int(rounds_as_leading), int(pl0_del_cnt),
        int(last_lead_msg), bool(iam_leader), float(rank), link,
    )
    return hashlib.blake2b(repr(canon).encode(), digest_size=8).hexdigest()
