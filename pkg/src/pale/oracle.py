"""Naive reference node used to cross-check the optimised state machine.

Written for obviousness rather than speed: the participant list is a
plain Python list re-sorted after every change and ``pl[0]`` is the
leading participant.  Nothing here is shared with ``protocol`` except
the digest encoding.
"""

import math

from .digest import digest


def _order(item):
    rank, tie, ident = item["rank"], item["tie"], item["id"]
    return (rank, () if tie is None else tie, ident)


class NaiveNode:
    def __init__(self, ident, w, max_ratio, phys_score, now):
        self.ident = ident
        self.w = w
        self.phys = phys_score
        self.max_ratio = max_ratio
        self.max_round = 2 * math.ceil(max_ratio) + 2
        self.pl = []
        self.cnt_rounds = 0
        self.rounds_as_leading = 0
        self.pl0_del_cnt = 0
        self.last_lead_msg = 0
        self.leader = False
        self.tie = None
        self.link = None
        self.rank = self.w * self.pl0_del_cnt + self.phys
        self.sent = [self._broadcast(now)]

    # -- list helpers -------------------------------------------------
    def _sort(self):
        self.pl.sort(key=_order, reverse=True)

    def _put(self, ident, rank, rnd, time, tie=None):
        self.pl = [p for p in self.pl if p["id"] != ident]
        self.pl.append({"id": ident, "rank": rank, "round": rnd,
                        "time": time, "tie": tie})
        self._sort()

    def _broadcast(self, now):
        tie = self.tie if self.leader else None
        msg = {"time": now, "rank": self.rank, "id": self.ident,
               "round": self.rounds_as_leading, "tie": tie}
        self._put(self.ident, self.rank, self.rounds_as_leading, now, tie)
        return msg

    def _lost_leading(self, now):
        dead = self.pl.pop(0)
        if self.link == dead["id"]:
            self.link = None
        self.pl0_del_cnt += 1
        self.rank = self.w * self.pl0_del_cnt + self.phys
        self._put(self.ident, self.rank, 0, now)

    # -- events -------------------------------------------------------
    def timer(self, now):
        out = []
        if self.leader:
            out.append(self._broadcast(now))
            return out
        self.cnt_rounds = self.cnt_rounds + 1
        if self.pl[0]["id"] != self.ident and \
                self.cnt_rounds - self.last_lead_msg > math.ceil(self.max_ratio):
            self._lost_leading(now)
        if self.pl[0]["id"] == self.ident:
            self.rounds_as_leading = self.rounds_as_leading + 1
            if self.rounds_as_leading == self.max_round:
                self.tie = (self.rank, self.cnt_rounds, self.ident)
                self.rank = math.inf
                self.leader = True
            out.append(self._broadcast(now))
        return out

    def beep(self, msg, now):
        v = msg["id"]
        top = self.pl[0]
        if top["id"] == v and top["round"] > msg["round"] and top["time"] < msg["time"]:
            self._lost_leading(now)
        top = self.pl[0]
        if top["id"] == self.ident and v != self.ident and _order(top) < _order(msg):
            self.rounds_as_leading = 0
        self._put(v, msg["rank"], msg["round"], msg["time"], msg["tie"])
        handshake = None
        if self.pl[0]["id"] == v and msg["round"] >= self.max_round:
            if self.link != v:
                self.link = v
                handshake = v
        if self.pl[0]["id"] == v:
            self.last_lead_msg = self.cnt_rounds
        return handshake

    def digest(self):
        rows = [(p["id"], p["rank"], p["round"], p["time"], p["tie"]) for p in self.pl]
        return digest(rows, self.cnt_rounds, self.rounds_as_leading,
                      self.pl0_del_cnt, self.last_lead_msg, self.leader,
                      self.rank, self.link)
