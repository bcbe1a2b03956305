"""Built-in scenario generators.

Every generator returns a validated ``SimConfig``; randomness (clock
rates, phases, scores) comes from ``seed`` so a scenario is reproducible
from its arguments alone.
"""

from __future__ import annotations

import math
import random
from dataclasses import replace
from typing import Sequence, Union

from .config import (DOWN, UP, ChurnScript, ClockModel, NodeConfig, ScenarioError,
                     SimConfig, StochasticChurn, require_valid, stream_seed)

PERIOD = 1000  # fastest round, virtual ticks

REGIMES = ("worst", "monotonic", "mild")


def _rng(seed, name) -> random.Random:
    return random.Random(stream_seed(seed, "scenario", name))


def _clock(rng: random.Random, max_ratio: float, period: int = PERIOD) -> ClockModel:
    p = rng.randint(period, math.floor(period * max_ratio))
    rate = period / p
    return ClockModel(rate=rate, round_length=period, offset=round(rng.uniform(0, 1e6), 3))


def _fixed_clock(period: int = PERIOD) -> ClockModel:
    return ClockModel(rate=1.0, round_length=period)


def static(n: int = 5, seed: int = 0, *, max_ratio: float = 1.0, w: float = 1 / 16,
           msg_delay: int = PERIOD, horizon_rounds: int = 200) -> SimConfig:
    """n nodes, no churn, distinct physical scores, random clocks and phases."""
    rng = _rng(seed, "static")
    phys = rng.sample(range(1, 101), n)
    nodes = []
    for i in range(n):
        clock = _clock(rng, max_ratio)
        up = rng.randrange(clock.period)
        nodes.append(NodeConfig(i, phys[i] / 100, clock, ChurnScript.always_up(up)))
    cfg = SimConfig(tuple(nodes), max_ratio=max_ratio, msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=horizon_rounds * math.ceil(PERIOD * max_ratio),
                    scenario={"name": "static"})
    require_valid(cfg)
    return cfg


def jitter_cycle_script(first_up: int, period: int, max_round: int, down: int,
                        horizon: int) -> ChurnScript:
    """Up for ``max_round - 1`` rounds, then down on the tick of round ``max_round``.

    Failures are processed before timers on the same tick, so the node
    never completes the round that would make it leader.
    """
    trans, t = [], first_up
    while t <= horizon:
        trans.append((t, UP))
        t_down = t + max_round * period
        if t_down > horizon:
            break
        trans.append((t_down, DOWN))
        t = t_down + down
    return ChurnScript(tuple(trans))


def termination_k(stable_phys: float, others: Sequence[float], w: float) -> int:
    gaps = [math.ceil(round((p - stable_phys) / w, 9)) for p in others]
    return max([1, *gaps])


def adversarial_jitter_scenario(stable_phys: float = 0.5,
                                jitter_phys: Union[float, Sequence[float]] = 1.0,
                                *, n: int = 2, w: float = 0.05, max_ratio: float = 1.0,
                                seed: int = 0, down_rounds: float = 0.5,
                                msg_delay: int = PERIOD) -> SimConfig:
    """One stable node against ``n - 1`` stronger nodes that keep failing.

    Each jitterer fails on the tick it would finish ``max_round`` rounds as
    leading participant and returns ``down_rounds`` stable-node rounds later.
    With ``down_rounds < ceil(max_ratio)`` the stable node gains one
    failure detection per cycle and nothing more; with ``down_rounds >= max_round`` the stable node
    wins during the first outage.
    """
    if isinstance(jitter_phys, (int, float)):
        if n == 2:
            jphys = [float(jitter_phys)]
        else:
            step = (jitter_phys - stable_phys) / (n - 1)
            jphys = [jitter_phys - j * step for j in range(n - 1)]
    else:
        jphys = [float(p) for p in jitter_phys]
        n = len(jphys) + 1
    if min(jphys) <= stable_phys:
        raise ScenarioError("every jitterer must be stronger than the stable node")

    rng = _rng(seed, "adversarial")
    max_round = 2 * math.ceil(max_ratio) + 2
    k = termination_k(stable_phys, jphys, w)
    s_clock = _clock(rng, max_ratio)
    bound_rounds = n * k * 2 * (math.ceil(max_ratio) + 1) ** 2
    horizon = (bound_rounds + 4 * max_round) * math.ceil(PERIOD * max_ratio)
    down = max(1, int(down_rounds * s_clock.period))

    nodes = [NodeConfig(0, stable_phys, s_clock, ChurnScript.always_up(rng.randrange(s_clock.period)))]
    for j, phys in enumerate(jphys, start=1):
        clock = _clock(rng, max_ratio)
        script = jitter_cycle_script(rng.randrange(clock.period), clock.period, max_round,
                                     down, horizon)
        nodes.append(NodeConfig(j, phys, clock, script))
    cfg = SimConfig(tuple(nodes), max_ratio=max_ratio, msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=horizon, stable=0,
                    scenario={"name": "adversarial", "k": k, "down": down,
                              "bound_rounds": bound_rounds})
    require_valid(cfg)
    return cfg


def random_churn(n: int = 6, seed: int = 0, *, max_ratio: float = 1.5, w: float = 1 / 16,
                 fail_prob: float = 0.08, horizon_rounds: int = 100,
                 msg_delay: int = PERIOD) -> SimConfig:
    """One stable node; every other node fails and recovers at random."""
    rng = _rng(seed, "random")
    stable = rng.randrange(n)
    nodes = []
    for i in range(n):
        clock = _clock(rng, max_ratio)
        start = rng.randrange(3 * clock.period)
        if i == stable:
            churn = ChurnScript.always_up(start)
        else:
            churn = StochasticChurn(fail_prob=fail_prob, down_min=1,
                                    down_max=4 * clock.period, start=start)
        nodes.append(NodeConfig(i, round(rng.random(), 3), clock, churn))
    cfg = SimConfig(tuple(nodes), max_ratio=max_ratio, msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=horizon_rounds * math.ceil(PERIOD * max_ratio),
                    run_to_horizon=True, stable=stable, scenario={"name": "random"})
    require_valid(cfg)
    return cfg


# -- message complexity regimes ------------------------------------------
#
# The regime scenarios run every node on one period and phase so that a
# beep sent on a tick always lands before the next tick.  w is kept small
# relative to the gaps between scores so that repeated failure detections
# never reorder the survivors.

def mild(n: int = 8, seed: int = 0, *, w: float = 1 / 4096,
         msg_delay: int = PERIOD) -> SimConfig:
    """Stable network whose leader fails once after everyone handshook."""
    max_round = 4
    fail_time = (max_round + 4) * PERIOD + PERIOD // 2
    nodes = [NodeConfig(0, 1.0, _fixed_clock(), ChurnScript(((0, UP), (fail_time, DOWN)))),
             NodeConfig(1, 0.9, _fixed_clock())]
    for i in range(2, n):
        nodes.append(NodeConfig(i, round(0.1 + 0.4 * (i - 2) / max(1, n - 3), 6), _fixed_clock()))
    cfg = SimConfig(tuple(nodes), msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=fail_time + 20 * PERIOD, stable=1,
                    settle_time=fail_time + 1,
                    scenario={"name": "mild", "regime": "mild", "fail_time": fail_time,
                              "failed": 0})
    require_valid(cfg)
    return cfg


def _spread(n: int) -> list[float]:
    return [round(0.05 + 0.95 * i / max(1, n - 1), 6) for i in range(n)]


def monotonic_join(n: int = 8, seed: int = 0, *, w: float = 1 / 4096,
                   gap_rounds: int = 2, msg_delay: int = PERIOD) -> SimConfig:
    """Nodes join one at a time in ascending rank, the strongest last."""
    phys = _spread(n)
    nodes = [NodeConfig(i, phys[i], _fixed_clock(), ChurnScript.always_up(i * gap_rounds * PERIOD))
             for i in range(n)]
    last = (n - 1) * gap_rounds * PERIOD
    cfg = SimConfig(tuple(nodes), msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=last + 20 * PERIOD, stable=n - 1, settle_time=last,
                    scenario={"name": "monotonic-join", "regime": "monotonic",
                              "settle": last})
    require_valid(cfg)
    return cfg


def monotonic_leave(n: int = 8, seed: int = 0, *, w: float = 1 / 4096,
                    msg_delay: int = PERIOD) -> SimConfig:
    """All nodes start together and leave in descending rank.

    A leading participant leaves after two rounds in front; the followers
    notice two rounds later and the next one takes over.
    """
    phys = _spread(n)[::-1]
    nodes, lead = [], PERIOD
    for i in range(n):
        if i < n - 1:
            leave = lead + PERIOD + PERIOD // 2
            churn = ChurnScript(((0, UP), (leave, DOWN)))
            lead += 3 * PERIOD
        else:
            churn = ChurnScript()
        nodes.append(NodeConfig(i, phys[i], _fixed_clock(), churn))
    settle = nodes[-2].churn.transitions[-1][0] if n > 1 else 0
    cfg = SimConfig(tuple(nodes), msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=settle + 20 * PERIOD, stable=n - 1, settle_time=settle,
                    scenario={"name": "monotonic-leave", "regime": "monotonic",
                              "settle": settle})
    require_valid(cfg)
    return cfg


def worst(n: int = 8, seed: int = 0, *, p_join: float = 0.2, w: float = 1 / 16,
          horizon_rounds: int = 60, msg_delay: int = PERIOD) -> SimConfig:
    """Harsh churn: each round about ``p_join * n`` nodes fail and rejoin.

    Recoveries land on each node's own round slot, as in a node that
    reboots and resumes its timer cadence.
    """
    rng = _rng(seed, "worst")
    stable = rng.randrange(n)
    nodes = []
    for i in range(n):
        phase = rng.randrange(PERIOD)
        if i == stable:
            churn = ChurnScript.always_up(phase)
        else:
            churn = StochasticChurn(fail_prob=p_join, down_min=1, down_max=2 * PERIOD,
                                    start=phase, align_up=True)
        nodes.append(NodeConfig(i, round(rng.random(), 3), _fixed_clock(), churn))
    cfg = SimConfig(tuple(nodes), msg_delay=msg_delay, w=w, seed=seed,
                    max_virtual_time=horizon_rounds * PERIOD, run_to_horizon=True,
                    stable=stable, scenario={"name": "worst", "regime": "worst",
                                             "p_join": p_join})
    require_valid(cfg)
    return cfg


# -- merging regions -------------------------------------------------------

def merge_scenario(cfg_a: SimConfig, cfg_b: SimConfig, merge_time: int) -> SimConfig:
    """Two regions that elect independently, then share one broadcast domain."""
    from .engine import run

    ids_a = {nc.id for nc in cfg_a.nodes}
    ids_b = {nc.id for nc in cfg_b.nodes}
    if ids_a & ids_b:
        raise ScenarioError(f"regions share node ids {sorted(ids_a & ids_b)}")
    for attr in ("max_ratio", "msg_delay", "delay_multiplier", "w", "num_copies",
                 "on_timer_cost", "on_msg_cost"):
        if getattr(cfg_a, attr) != getattr(cfg_b, attr):
            raise ScenarioError(f"regions disagree on {attr}")

    seed = cfg_a.seed
    for name, sub in (("A", cfg_a), ("B", cfg_b)):
        probe = replace(sub, seed=seed, max_virtual_time=merge_time, run_to_horizon=False,
                        merge_time=None, stable=None,
                        nodes=tuple(replace(nc, region=0) for nc in sub.nodes))
        trace = run(probe)
        stop = trace.events[-1]
        if stop.payload.get("reason") != "quiescence":
            raise ScenarioError(f"region {name} has not elected a leader by t={merge_time}")

    nodes = tuple(replace(nc, region=0) for nc in cfg_a.nodes) + \
        tuple(replace(nc, region=1) for nc in cfg_b.nodes)
    period = max(nc.clock.period for nc in nodes)
    cfg = replace(cfg_a, nodes=nodes, merge_time=merge_time, stable=None,
                  max_virtual_time=merge_time + 10 * 2 * cfg_a.max_round * period,
                  run_to_horizon=False,
                  scenario={"name": "merge", "merge_time": merge_time})
    require_valid(cfg)
    return cfg


def merge_pair(seed: int = 0, *, phys_a: float = 0.9, phys_b: float = 0.7,
               n_a: int = 3, n_b: int = 3, max_ratio: float = 1.0,
               merge_rounds: int = 20) -> SimConfig:
    """Two static regions led by nodes with scores ``phys_a`` and ``phys_b``."""
    rng = _rng(seed, "merge")

    def region(ids, top):
        nodes = []
        for j, i in enumerate(ids):
            clock = _clock(rng, max_ratio)
            phys = top if j == 0 else round(rng.uniform(0.05, top - 0.05), 3)
            nodes.append(NodeConfig(i, phys, clock, ChurnScript.always_up(rng.randrange(clock.period))))
        return SimConfig(tuple(nodes), max_ratio=max_ratio, msg_delay=PERIOD, seed=seed)

    a = region(range(0, n_a), phys_a)
    b = region(range(n_a, n_a + n_b), phys_b)
    return merge_scenario(a, b, merge_rounds * math.ceil(PERIOD * max_ratio))


BUILTIN = {
    "static": static,
    "adversarial": adversarial_jitter_scenario,
    "random": random_churn,
    "mild": mild,
    "monotonic-join": monotonic_join,
    "monotonic-leave": monotonic_leave,
    "worst": worst,
    "merge": merge_pair,
}


def builtin(name: str, n: int | None = None, seed: int = 0) -> SimConfig:
    try:
        make = BUILTIN[name]
    except KeyError:
        raise ScenarioError(f"unknown built-in scenario {name!r}; "
                            f"choose from {', '.join(BUILTIN)}") from None
    if name == "merge":
        half = (n or 6) // 2
        return make(seed, n_a=half, n_b=(n or 6) - half)
    if n is None:
        return make(seed=seed)
    return make(n=n, seed=seed)
