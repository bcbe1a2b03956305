"""Deterministic discrete-event simulation of one election region.

Virtual time is integer ticks.  All randomness comes from per-node streams
derived from the run seed, so a node's delays and failures do not depend
on how many other nodes share the run.
"""

from __future__ import annotations

import heapq
import logging
import random
from bisect import bisect_right
from dataclasses import dataclass

from . import protocol
from .config import (DOWN, UP, SimConfig, StochasticChurn,
                     require_valid, stream_seed)
from .protocol import BecameLeader, Broadcast, Handshake, Rejected
from .scenario_io import config_to_dict
from .trace import Trace, TraceEvent, msg_to_dict

log = logging.getLogger(__name__)

# same-tick processing order
_PRIORITY = {DOWN: 0, UP: 1, "merge": 2, "deliver": 3, "timer": 4}


@dataclass
class _Live:
    state: protocol.NodeState
    incarnation: int
    timer_index: int = 0
    conflicts: frozenset = frozenset()


def expand_churn(cfg: SimConfig) -> dict:
    """Concrete up/down timeline per node, stochastic models resolved by seed."""
    out = {}
    for nc in cfg.nodes:
        churn = nc.churn
        if isinstance(churn, StochasticChurn):
            rng = random.Random(stream_seed(cfg.seed, "churn", nc.id))
            churn = churn.expand(nc.clock.period, rng, cfg.max_virtual_time)
        out[nc.id] = churn.transitions
    return out


class Simulator:
    def __init__(self, cfg: SimConfig):
        require_valid(cfg)
        self.cfg = cfg
        self.ids = sorted(nc.id for nc in cfg.nodes)
        self.nodes = {nc.id: nc for nc in cfg.nodes}
        self.params = {nc.id: cfg.params_for(nc) for nc in cfg.nodes}
        self.rng = {i: random.Random(stream_seed(cfg.seed, "net", i)) for i in self.ids}
        self.timeline = expand_churn(cfg)
        self._times = {i: [t for t, _ in self.timeline[i]] for i in self.ids}
        self._up_times = {i: [t for t, k in self.timeline[i] if k == UP] for i in self.ids}
        self.live: dict = {}
        self.incarnations = {i: 0 for i in self.ids}
        self.busy = {i: 0 for i in self.ids}
        self.queue: list = []
        self._seq = 0
        self.events: list[TraceEvent] = []
        self.now = 0

    # -- bookkeeping --------------------------------------------------
    def _push(self, time, kind, node, data=None):
        self._seq += 1
        heapq.heappush(self.queue, (time, _PRIORITY[kind], self._seq, kind, node, data))

    def _record(self, kind, node=None, payload=None, digest=None):
        self.events.append(TraceEvent(len(self.events), self.now, node, kind,
                                      payload or {}, digest))

    def alive_at(self, node, t) -> bool:
        times = self._times[node]
        i = bisect_right(times, t)
        return i > 0 and self.timeline[node][i - 1][1] == UP

    def next_transition_after(self, node, t) -> float:
        times = self._times[node]
        i = bisect_right(times, t)
        return times[i] if i < len(times) else float("inf")

    def local(self, node, t=None) -> float:
        return self.nodes[node].clock.local(self.now if t is None else t)

    # -- main loop ----------------------------------------------------
    def run(self) -> Trace:
        cfg = self.cfg
        for i in self.ids:
            for t, kind in self.timeline[i]:
                self._push(t, kind, i)
        if cfg.merge_time is not None:
            self._push(cfg.merge_time, "merge", None)

        reason = "drained"
        while self.queue:
            t = self.queue[0][0]
            if t > cfg.max_virtual_time:
                reason = "horizon"
                break
            while self.queue and self.queue[0][0] == t:
                _, _, _, kind, node, data = heapq.heappop(self.queue)
                self.now = t
                self._dispatch(kind, node, data)
            if not cfg.run_to_horizon and self._quiescent():
                reason = "quiescence"
                break
        self._record("stop", payload={"reason": reason})
        return Trace(config_to_dict(cfg), self.events)

    def _dispatch(self, kind, node, data):
        if kind == DOWN:
            self.live.pop(node, None)
            self._record(DOWN, node)
        elif kind == UP:
            self._start(node)
        elif kind == "merge":
            self._record("merge")
        else:
            ln = self.live.get(node)
            if ln is None or ln.incarnation != data["inc"]:
                if kind == "deliver":
                    self._record("lost", node, {"from": data["from"], "send": data["send"]})
                return
            if self.busy[node] > self.now:
                self._seq += 1
                heapq.heappush(self.queue, (self.busy[node], _PRIORITY[kind], self._seq,
                                            kind, node, data))
                return
            if kind == "timer":
                self._timer(node, ln, data)
            else:
                self._deliver(node, ln, data)

    def _start(self, node):
        self.incarnations[node] += 1
        inc = self.incarnations[node]
        now_local = self.local(node)
        state, actions = protocol.init_node(self.params[node], node, now_local)
        ln = _Live(state, inc)
        self.live[node] = ln
        self._record(UP, node, {"incarnation": inc, "now": now_local}, state.digest())
        self._apply(node, ln, actions, departs=self.now)
        period = self.nodes[node].clock.period
        self._push(self.now + period, "timer", node, {"inc": inc, "nominal": self.now + period})

    def _timer(self, node, ln: _Live, data):
        ln.timer_index += 1
        now_local = self.local(node)
        _, actions = protocol.on_round_timer(ln.state, now_local)
        self._record("timer", node, {"now": now_local, "index": ln.timer_index},
                     ln.state.digest())
        cost = self.cfg.on_timer_cost
        if cost:
            self.busy[node] = self.now + cost
        self._apply(node, ln, actions, departs=self.now + cost)
        nxt = data["nominal"] + self.nodes[node].clock.period
        self._push(nxt, "timer", node, {"inc": ln.incarnation, "nominal": nxt})

    def _deliver(self, node, ln: _Live, data):
        msg = data["msg"]
        now_local = self.local(node)
        _, actions = protocol.on_beep_received(ln.state, msg, now_local)
        self._record("deliver", node,
                     {"from": data["from"], "send": data["send"], "msg": msg_to_dict(msg),
                      "sent_at": data["sent_at"], "arrived_at": data["arrived_at"],
                      "now": now_local},
                     ln.state.digest())
        if self.cfg.on_msg_cost:
            self.busy[node] = self.now + self.cfg.on_msg_cost
        self._apply(node, ln, actions, departs=self.now)
        st = ln.state
        if st.iam_leader and st.best.id != node and st.best.id not in ln.conflicts:
            # a sitting leader never steps down; record that it saw a stronger leader
            ln.conflicts = ln.conflicts | {st.best.id}
            self._record("leader_conflict", node, {"other": st.best.id})

    def _apply(self, node, ln: _Live, actions, departs):
        for act in actions:
            if isinstance(act, Broadcast):
                self._broadcast(node, ln, act, departs)
            elif isinstance(act, Handshake):
                self._record("handshake", node,
                             {"target": act.target,
                              "target_incarnation": self.incarnations[act.target]})
            elif isinstance(act, BecameLeader):
                self._record("became_leader", node,
                             {"rounds_as_leading": act.rounds_as_leading,
                              "tie": list(act.tie), "timer_index": ln.timer_index})
            elif isinstance(act, Rejected):
                log.warning("node %r rejected a message: %s", node, act.reason)
                self._record("reject", node, {"reason": act.reason})

    def _broadcast(self, sender, ln: _Live, act: Broadcast, departs: int):
        cfg = self.cfg
        if departs > self.now and self.next_transition_after(sender, self.now) <= departs:
            self._record("abort", sender, {"index": ln.timer_index})
            return
        send_id = len(self.events)
        self._record("send", sender, {"msg": msg_to_dict(act.msg), "copies": act.copies,
                                      "index": ln.timer_index, "departs": departs,
                                      "incarnation": ln.incarnation})
        rng = self.rng[sender]
        region = self.nodes[sender].region
        merged = cfg.merge_time is not None and departs >= cfg.merge_time
        bound = cfg.max_delay
        for r in self.ids:
            if r == sender or (not merged and self.nodes[r].region != region):
                continue
            delay = None
            for _ in range(act.copies):
                if cfg.lossy and rng.random() < cfg.loss_prob:
                    continue
                d = bound if cfg.worst_case_delay else rng.randint(1, bound)
                delay = d if delay is None else min(delay, d)
            if delay is None:
                self._record("drop", sender, {"to": r, "send": send_id})
                continue
            arrive = departs + delay
            if not self.alive_at(r, departs) or self.next_transition_after(r, departs) <= arrive:
                continue
            self._push(arrive, "deliver", r,
                       {"inc": bisect_right(self._up_times[r], departs),
                        "msg": act.msg, "from": sender, "send": send_id,
                        "sent_at": departs, "arrived_at": arrive})

    def _quiescent(self) -> bool:
        if self.now < self.cfg.settle_time:
            return False
        if self.cfg.merge_time is not None and self.now < self.cfg.merge_time:
            return False
        leaders = [i for i, ln in self.live.items() if ln.state.iam_leader]
        if not leaders:
            return False
        for lead in leaders:
            if all(ln.state.link == lead for i, ln in self.live.items() if i != lead):
                return True
        return False


def run(cfg: SimConfig) -> Trace:
    return Simulator(cfg).run()
