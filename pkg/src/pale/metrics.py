"""Verdicts over finished traces.

Every checker rebuilds what it needs from the trace records alone (who was
up when, which timers fired, what was sent and delivered) instead of
trusting the simulator's internal state.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .config import SimConfig
from .oracle import NaiveNode
from .protocol import ConfigError
from .scenarios import termination_k
from .trace import Trace, decode_rank


@dataclass
class Verdict:
    name: str
    passed: bool
    witness: Optional[tuple] = None  # (from_time, to_time) to narrate with `pale replay`
    measured: Optional[float] = None
    detail: str = ""
    severity: str = "error"
    skipped: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and not self.witness:
            raise ValueError(f"failing verdict {self.name!r} needs a witness")

    def to_record(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "witness": list(self.witness) if self.witness else None,
                "measured": self.measured, "detail": self.detail,
                "severity": self.severity, "skipped": self.skipped}

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else
                                             ("WARN" if self.severity == "warning" else "FAIL"))
        m = "" if self.measured is None else f" measured={self.measured:g}"
        w = "" if self.passed or not self.witness else f" witness=[{self.witness[0]}, {self.witness[1]}]"
        return f"{status:4} {self.name}{m}{w} {self.detail}".rstrip()


def _end(trace: Trace) -> int:
    return trace.events[-1].time if trace.events else 0


class _Index:
    """Per-node facts reconstructed from a trace."""

    def __init__(self, trace: Trace):
        self.timers = defaultdict(list)      # node -> [time]
        self.lives = defaultdict(list)       # node -> [(up, down_or_inf, incarnation)]
        self.sends = {}                      # seq -> event
        self.periods = {}
        cfg = trace.config
        for nd in cfg["node"]:
            self.periods[nd["id"]] = max(1, round(nd["round_length"] / nd["rate"]))
        for e in trace.events:
            if e.kind == "timer":
                self.timers[e.node].append(e.time)
            elif e.kind == "up":
                self.lives[e.node].append([e.time, math.inf, e.payload["incarnation"]])
            elif e.kind == "down":
                if self.lives[e.node] and self.lives[e.node][-1][1] == math.inf:
                    self.lives[e.node][-1][1] = e.time
            elif e.kind == "send":
                self.sends[e.seq] = e

    def rounds_in(self, node, start, end) -> int:
        """Timer fires of ``node`` in the half-open window (start, end]."""
        ts = self.timers[node]
        return max(0, bisect_right(ts, end) - bisect_right(ts, start))

    def life_at(self, node, t):
        for up, down, inc in self.lives[node]:
            if up <= t < down:
                return up, down, inc
        return None


def _ceil_ratio(trace: Trace) -> int:
    return math.ceil(trace.config.get("max_ratio", 1.0))


def _max_round(trace: Trace) -> int:
    return 2 * _ceil_ratio(trace) + 2


# -- safety --------------------------------------------------------------

def check_uniqueness(trace: Trace) -> Verdict:
    """At most one live leader per region; regions are only checked before a merge."""
    merge_time = trace.config.get("merge_time")
    region = {nd["id"]: nd.get("region", 0) for nd in trace.config["node"]}
    leaders: dict = defaultdict(dict)
    start = None
    for e in trace.events:
        if merge_time is not None and e.time >= merge_time:
            break
        if e.kind == "became_leader":
            leaders[region[e.node]][e.node] = e.time
        elif e.kind == "down":
            leaders[region[e.node]].pop(e.node, None)
        else:
            continue
        crowded = [ls for ls in leaders.values() if len(ls) > 1]
        if crowded and start is None:
            start = max(crowded[0].values())
            who = sorted(crowded[0])
        elif not crowded and start is not None:
            return Verdict("uniqueness", False, (start, e.time),
                           detail=f"nodes {who} were leaders at the same time")
    if start is not None:
        return Verdict("uniqueness", False, (start, _end(trace)),
                       detail=f"nodes {who} were leaders at the same time")
    note = "checked per region before the merge" if merge_time is not None else ""
    return Verdict("uniqueness", True, detail=note)


def check_agreement(trace: Trace, since: Optional[int] = None) -> Verdict:
    leaders: dict = {}     # node -> incarnation while it claims leadership
    incarnation: dict = {}
    target: dict = {}      # live node -> (target, target incarnation, time)
    for e in trace.events:
        if e.kind == "up":
            incarnation[e.node] = e.payload["incarnation"]
            target.pop(e.node, None)
        elif e.kind == "down":
            leaders.pop(e.node, None)
            target.pop(e.node, None)
        elif e.kind == "became_leader":
            leaders[e.node] = incarnation[e.node]
        elif e.kind == "handshake":
            target[e.node] = (e.payload["target"], e.payload["target_incarnation"], e.time)
        else:
            continue
        if since is not None and e.time < since:
            continue
        valid = {t for t, inc, _ in target.values() if leaders.get(t) == inc}
        if len(valid) > 1:
            first = min(ts for t, inc, ts in target.values() if leaders.get(t) == inc)
            return Verdict("agreement", False, (first, e.time),
                           detail=f"live nodes handshook with distinct leaders {sorted(valid)}")
    return Verdict("agreement", True)


# -- liveness ------------------------------------------------------------

def termination_bound(cfg: SimConfig) -> tuple:
    s = cfg.stable_node()
    s_phys = cfg.node(s).phys_score
    k = termination_k(s_phys, [nc.phys_score for nc in cfg.nodes if nc.id != s], cfg.w)
    return s, k, cfg.n * k * 2 * (math.ceil(cfg.max_ratio) + 1) ** 2


def check_termination_bound(trace: Trace, cfg: Optional[SimConfig] = None) -> Verdict:
    cfg = cfg or trace.sim_config()
    s, k, bound = termination_bound(cfg)
    first = next((e for e in trace.events if e.kind == "became_leader"), None)
    if first is None:
        return Verdict("termination", False, (0, _end(trace)), detail="no leader elected",
                       extra={"bound": bound, "k": k})
    idx = _Index(trace)
    measured = bisect_right(idx.timers[s], first.time)
    return Verdict("termination", measured <= bound, (0, first.time), measured=measured,
                   detail=f"leader {first.node!r} after {measured} rounds of stable node "
                          f"{s!r}; bound n*k*2(ceil(ratio)+1)^2 = {bound} (k={k})",
                   extra={"bound": bound, "k": k, "leader": first.node, "stable": s})


def check_threshold(trace: Trace) -> Verdict:
    max_round = _max_round(trace)
    sends = defaultdict(list)
    for e in trace.events:
        if e.kind == "send":
            sends[(e.node, e.payload["incarnation"])].append(e)
    incarnation = {}
    for e in trace.events:
        if e.kind == "up":
            incarnation[e.node] = e.payload["incarnation"]
        if e.kind != "became_leader":
            continue
        if e.payload["rounds_as_leading"] != max_round:
            return Verdict("threshold", False, (e.time, e.time),
                           detail=f"{e.node!r} became leader after "
                                  f"{e.payload['rounds_as_leading']} rounds, expected {max_round}")
        ti = e.payload["timer_index"]
        mine = sends[(e.node, incarnation[e.node])]
        before = [s for s in mine if s.seq < e.seq][-(max_round - 1):]
        after = [s for s in mine if s.seq > e.seq][:1]
        # the first leader beep may be aborted when the node fails while sending
        run = before + [s for s in after if s.payload["index"] == ti]
        rounds = [s.payload["msg"]["round"] for s in run]
        idxs = [s.payload["index"] for s in run]
        ok = (rounds[:max_round - 1] == list(range(1, max_round))
              and idxs == list(range(ti - max_round + 1, ti - max_round + 1 + len(run)))
              and rounds[max_round - 1:] in ([], [max_round]))
        if not ok:
            return Verdict("threshold", False, (run[0].time if run else e.time, e.time),
                           detail=f"{e.node!r} announced rounds {rounds} at timer indices "
                                  f"{idxs} before leading at index {ti}")
    return Verdict("threshold", True)


def check_new_joiner_latency(trace: Trace) -> Verdict:
    """Nodes that join under a sitting leader handshake with it in time."""
    idx = _Index(trace)
    limit = _ceil_ratio(trace) + _max_round(trace)
    leader_since = {}
    handshakes = defaultdict(list)
    for e in trace.events:
        if e.kind == "handshake":
            handshakes[e.node].append((e.time, e.payload["target"]))
    worst, checked = 0, 0
    for e in trace.events:
        if e.kind == "became_leader":
            leader_since[e.node] = e.time
        elif e.kind == "down":
            leader_since.pop(e.node, None)
        elif e.kind == "up" and leader_since:
            (lead,) = leader_since
            x = e.node
            timers = [t for t in idx.timers[x] if t > e.time]
            _, x_down, _ = idx.life_at(x, e.time)
            _, l_down, _ = idx.life_at(lead, e.time)
            if len(timers) < limit or timers[limit - 1] >= min(x_down, l_down):
                continue  # joiner or leader did not live through the window
            deadline = timers[limit - 1]
            got = [t for t, tgt in handshakes[x] if tgt == lead and e.time <= t <= deadline]
            checked += 1
            if not got:
                return Verdict("new-joiner", False, (e.time, deadline),
                               detail=f"{x!r} joined under leader {lead!r} and did not "
                                      f"handshake within {limit} of its rounds")
            worst = max(worst, bisect_left(timers, got[0]))
    return Verdict("new-joiner", True, measured=worst,
                   detail=f"{checked} joiners, slowest handshake after {worst} rounds "
                          f"(limit {limit})")


# -- timing assumptions --------------------------------------------------

def check_delivery_bound(trace: Trace) -> Verdict:
    bound = trace.config.get("delay_multiplier", 1) * trace.config["msg_delay"]
    worst = 0
    for e in trace.of_kind("deliver"):
        d = e.payload["arrived_at"] - e.payload["sent_at"]
        worst = max(worst, d)
        if not 0 < d <= bound:
            return Verdict("delivery", False, (e.payload["sent_at"], e.time),
                           measured=d, detail=f"delay {d} outside (0, {bound}]")
    return Verdict("delivery", True, measured=worst)


def check_no_resurrection(trace: Trace) -> Verdict:
    idx = _Index(trace)
    for e in trace.of_kind("deliver"):
        life = idx.life_at(e.node, e.payload["sent_at"])
        if life is None or not life[0] <= e.time < life[1]:
            return Verdict("no-resurrection", False, (e.payload["sent_at"], e.time),
                           detail=f"{e.node!r} received a beep sent while it was down "
                                  f"or across a restart")
    return Verdict("no-resurrection", True)


def check_sender_lag(trace: Trace) -> Verdict:
    """A sender runs at most ceil(ratio)+1 rounds between sending a beep and its handling."""
    idx = _Index(trace)
    bound = _ceil_ratio(trace) + 1
    worst = 0
    for e in trace.of_kind("deliver"):
        u = e.payload["from"]
        r = idx.rounds_in(u, e.payload["sent_at"], e.time)
        worst = max(worst, r)
        if r > bound:
            return Verdict("sender-lag", False, (e.payload["sent_at"], e.time), measured=r,
                           detail=f"sender {u!r} ran {r} rounds before {e.node!r} handled its beep")
    return Verdict("sender-lag", True, measured=worst, detail=f"bound {bound}")


def check_beep_gap(trace: Trace) -> Verdict:
    """Between consecutive beeps of one sender a receiver runs at most 2*ceil(ratio)+1 rounds."""
    idx = _Index(trace)
    bound = 2 * _ceil_ratio(trace) + 1
    arrivals = defaultdict(dict)  # (receiver, sender, incarnation) -> {index: time}
    for e in trace.of_kind("deliver"):
        s = idx.sends[e.payload["send"]]
        arrivals[(e.node, s.node, s.payload["incarnation"])][s.payload["index"]] = e.time
    worst = 0
    for (recv, sender, _), got in arrivals.items():
        for i, t1 in got.items():
            t2 = got.get(i + 1)
            if t2 is None:
                continue
            r = idx.rounds_in(recv, min(t1, t2), max(t1, t2))
            worst = max(worst, r)
            if r > bound:
                return Verdict("beep-gap", False, (min(t1, t2), max(t1, t2)), measured=r,
                               detail=f"{recv!r} ran {r} rounds between consecutive beeps "
                                      f"of {sender!r}")
    return Verdict("beep-gap", True, measured=worst, detail=f"bound {bound}")


def check_drift(trace: Trace) -> Verdict:
    """Round counts of continuously live nodes track their configured periods."""
    idx = _Index(trace)
    for node, lives in idx.lives.items():
        p = idx.periods[node]
        for up, down, _ in lives:
            end = min(down, _end(trace))
            got = idx.rounds_in(node, up, end)
            expect = (end - up) / p
            if abs(got - expect) > 1:
                return Verdict("drift", False, (up, end), measured=got,
                               detail=f"{node!r} ran {got} rounds, period implies {expect:.2f}")
    return Verdict("drift", True)


# -- message complexity ---------------------------------------------------

def measure_messages(trace: Trace, regime: str) -> Verdict:
    scenario = trace.config.get("scenario", {})
    if scenario.get("regime") != regime:
        raise ConfigError(f"trace comes from scenario {scenario.get('name')!r}, "
                          f"not a {regime!r} regime run")
    n = len(trace.config["node"])
    max_round = _max_round(trace)
    sends = trace.of_kind("send")
    leads = trace.of_kind("became_leader")
    name = f"messages-{regime}"

    if regime == "mild":
        fail = scenario["fail_time"]
        after = [e for e in leads if e.time > fail]
        if not after:
            return Verdict(name, False, (fail, _end(trace)), detail="no successor elected")
        t = after[0].time
        count = sum(1 for e in sends if fail < e.time <= t)
        senders = sorted({e.node for e in sends if fail < e.time <= t})
        return Verdict(name, count <= max_round, (fail, t), measured=count,
                       detail=f"{count} beeps from {senders} between leader failure and "
                              f"re-election (limit {max_round})",
                       extra={"total": count, "senders": senders})

    if regime == "monotonic":
        if not leads:
            return Verdict(name, False, (0, _end(trace)), detail="no leader elected")
        t = leads[-1].time
        count = sum(1 for e in sends if e.time <= t)
        return Verdict(name, count <= n * max_round, (0, t), measured=count,
                       detail=f"{count} beeps until the final leader (limit n*maxRound = "
                              f"{n * max_round})", extra={"total": count})

    if regime == "worst":
        period = max(max(1, round(nd["round_length"] / nd["rate"])) for nd in trace.config["node"])
        per_round = defaultdict(int)
        for e in sends:
            per_round[e.time // period] += 1
        peak = max(per_round.values(), default=0)
        bad = [r for r, c in per_round.items() if c > n]
        witness = (bad[0] * period, (bad[0] + 1) * period - 1) if bad else None
        first = leads[0].time if leads else None
        until = sum(1 for e in sends if first is not None and e.time <= first)
        return Verdict(name, not bad, witness, measured=peak,
                       detail=f"peak {peak} beeps in one round (limit n = {n}); "
                              f"{len(sends)} beeps in total",
                       extra={"total": len(sends), "peak": peak, "until_leader": until,
                              "rounds": len(per_round)})
    raise ConfigError(f"unknown regime {regime!r}")


# -- regions merging --------------------------------------------------------

def check_merge(trace: Trace) -> Verdict:
    """After a merge every live non-winner ends bound to the leader with the greatest tie."""
    merge_time = trace.config.get("merge_time")
    if merge_time is None:
        raise ConfigError("trace has no merge")
    max_round = _max_round(trace)
    period = max(max(1, round(nd["round_length"] / nd["rate"])) for nd in trace.config["node"])
    ties, alive = {}, set()
    latest = {}
    for e in trace.events:
        if e.kind == "up":
            alive.add(e.node)
            latest.pop(e.node, None)
        elif e.kind == "down":
            alive.discard(e.node)
            ties.pop(e.node, None)
        elif e.kind == "became_leader":
            ties[e.node] = tuple(e.payload["tie"])
        elif e.kind == "handshake":
            latest[e.node] = (e.payload["target"], e.time)
        if e.time < merge_time:
            pre_ties = dict(ties)
    if len(pre_ties) < 2:
        return Verdict("merge", False, (0, merge_time),
                       detail=f"expected two leaders at the merge, found {sorted(pre_ties)}")
    winner = max(pre_ties, key=lambda n: pre_ties[n])
    stragglers = [n for n in alive if n != winner and latest.get(n, (None,))[0] != winner]
    if stragglers:
        return Verdict("merge", False, (merge_time, _end(trace)),
                       detail=f"{sorted(stragglers)} never bound to winner {winner!r}")
    done = max([merge_time] + [latest[n][1] for n in alive if n != winner])
    rounds = (done - merge_time) / period
    return Verdict("merge", rounds <= 2 * max_round, (merge_time, done), measured=rounds,
                   detail=f"winner {winner!r} tie {list(pre_ties[winner])}; converged "
                          f"{rounds:.2f} slowest-node rounds after the merge "
                          f"(limit {2 * max_round})",
                   extra={"winner": winner, "converged_at": done})


# -- replay oracle ------------------------------------------------------------

def _msg(d: dict) -> dict:
    return {"time": float(d["time"]), "rank": decode_rank(d["rank"]), "id": d["id"],
            "round": d["round"], "tie": tuple(d["tie"]) if d["tie"] is not None else None}


def oracle_replay(trace: Trace) -> Verdict:
    """Re-run every node event through the naive reference node and compare digests."""
    cfg = trace.config
    if not trace.events:
        return Verdict("oracle", True, measured=0)
    phys = {nd["id"]: nd["phys_score"] for nd in cfg["node"]}
    w, ratio = cfg.get("w", 1 / 16), cfg.get("max_ratio", 1.0)
    nodes: dict = {}
    pending: dict = defaultdict(list)   # node -> beeps the oracle expects next
    compared = 0
    for e in trace.events:
        out = None
        if e.kind == "up":
            nodes[e.node] = NaiveNode(e.node, w, ratio, phys[e.node], e.payload["now"])
            out = nodes[e.node].sent
        elif e.kind == "down":
            nodes.pop(e.node, None)
            pending.pop(e.node, None)
            continue
        elif e.kind == "timer":
            out = nodes[e.node].timer(e.payload["now"])
        elif e.kind == "deliver":
            nodes[e.node].beep(_msg(e.payload["msg"]), e.payload["now"])
        elif e.kind == "send":
            want = pending[e.node].pop(0) if pending[e.node] else None
            if want != _msg(e.payload["msg"]):
                return Verdict("oracle", False, (e.time, e.time), measured=compared,
                               detail=f"event {e.seq}: {e.node!r} sent {e.payload['msg']}, "
                                      f"reference expected {want}")
            continue
        else:
            continue
        if out:
            pending[e.node].extend(out)
        compared += 1
        if nodes[e.node].digest() != e.digest:
            return Verdict("oracle", False, (e.time, e.time), measured=compared,
                           detail=f"event {e.seq} ({e.kind} at {e.node!r}): state digest "
                                  f"differs from the reference node")
    return Verdict("oracle", True, measured=compared, detail=f"{compared} states matched")


# -- bundles -----------------------------------------------------------------

CHECKS = ("uniqueness", "agreement", "termination", "threshold", "new-joiner",
          "delivery", "no-resurrection", "sender-lag", "beep-gap", "drift", "oracle",
          "messages", "merge")


def run_checks(trace: Trace, names=("all",)) -> list[Verdict]:
    names = CHECKS if "all" in names else tuple(names)
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(sorted(unknown))}")
    cfg = trace.sim_config()
    merged = cfg.merge_time is not None
    out = []
    merge_verdict = check_merge(trace) if merged else None
    for name in names:
        if name == "uniqueness":
            out.append(check_uniqueness(trace))
        elif name == "agreement":
            since = merge_verdict.extra.get("converged_at") if merge_verdict else None
            if merged and since is None:
                since = math.inf
            out.append(check_agreement(trace, since=since))
        elif name == "termination":
            s, _, bound = termination_bound(cfg)
            if cfg.max_virtual_time < bound * cfg.node(s).clock.period and not trace.of_kind("became_leader"):
                out.append(Verdict("termination", True, skipped=True,
                                   detail="horizon shorter than the analytic bound"))
            else:
                out.append(check_termination_bound(trace, cfg))
        elif name == "threshold":
            out.append(check_threshold(trace))
        elif name == "new-joiner":
            out.append(check_new_joiner_latency(trace))
        elif name == "delivery":
            out.append(check_delivery_bound(trace))
        elif name == "no-resurrection":
            out.append(check_no_resurrection(trace))
        elif name == "sender-lag":
            out.append(check_sender_lag(trace))
        elif name == "beep-gap":
            out.append(check_beep_gap(trace))
        elif name == "drift":
            out.append(check_drift(trace))
        elif name == "oracle":
            out.append(oracle_replay(trace))
        elif name == "messages":
            regime = cfg.scenario.get("regime")
            if regime is None:
                out.append(Verdict("messages", True, skipped=True, detail="not a regime scenario"))
            else:
                out.append(measure_messages(trace, regime))
        elif name == "merge":
            out.append(merge_verdict or Verdict("merge", True, skipped=True, detail="no merge"))
    if cfg.lossy:
        for v in out:
            if not v.passed:
                v.severity = "warning"
    return out
