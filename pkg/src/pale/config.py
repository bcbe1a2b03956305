"""World description for the simulator and its static validation."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field, replace
from itertools import permutations
from typing import Hashable, Optional, Union

from .protocol import ConfigError, NodeParams

UP, DOWN = "up", "down"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ClockModel:
    """A node clock running ``rate`` local ticks per virtual tick.

    ``round_length`` is measured on the local clock; the round period in
    virtual ticks is ``round_length / rate``, rounded to a whole tick.
    """

    rate: float = 1.0
    round_length: int = 1000
    offset: float = 0.0

    @property
    def period(self) -> int:
        return max(1, round(self.round_length / self.rate))

    def local(self, t: int) -> float:
        return self.offset + self.rate * t


@dataclass(frozen=True)
class ChurnScript:
    """Explicit up/down transitions.  A node is down before its first ``up``."""

    transitions: tuple = ((0, UP),)

    @classmethod
    def always_up(cls, at: int = 0) -> "ChurnScript":
        return cls(((at, UP),))

    @property
    def never_fails(self) -> bool:
        return all(kind == UP for _, kind in self.transitions) and bool(self.transitions)

    def problems(self) -> list[str]:
        out = []
        last_t, last_kind = None, DOWN
        for t, kind in self.transitions:
            if kind not in (UP, DOWN):
                out.append(f"unknown transition {kind!r}")
            elif kind == last_kind:
                out.append(f"transition {kind!r} at {t} does not alternate")
            if last_t is not None and t <= last_t:
                out.append(f"transition times not strictly increasing at {t}")
            if t < 0:
                out.append(f"negative transition time {t}")
            last_t, last_kind = t, kind
        return out


@dataclass(frozen=True)
class StochasticChurn:
    """Per-round failures drawn from the run seed.

    Each round the node fails with ``fail_prob`` at a uniformly chosen tick
    of that round and stays down for a uniform number of ticks in
    ``[down_min, down_max]``.  With ``align_up`` a recovery is deferred to
    the node's next round slot so its beeps stay on a fixed phase.
    """

    fail_prob: float
    down_min: int
    down_max: int
    start: int = 0
    until: Optional[int] = None
    align_up: bool = False

    @property
    def never_fails(self) -> bool:
        return self.fail_prob == 0

    def problems(self) -> list[str]:
        out = []
        if not 0 <= self.fail_prob <= 1:
            out.append("fail_prob outside [0, 1]")
        if not 1 <= self.down_min <= self.down_max:
            out.append("need 1 <= down_min <= down_max")
        return out

    def expand(self, period: int, rng: random.Random, horizon: int) -> ChurnScript:
        until = horizon if self.until is None else min(self.until, horizon)
        trans = []
        t_up = self.start
        while t_up <= horizon:
            trans.append((t_up, UP))
            k, down_at = 1, None
            while t_up + (k - 1) * period < until:
                if self.fail_prob > 0 and rng.random() < self.fail_prob:
                    down_at = t_up + (k - 1) * period + rng.randint(1, period)
                    break
                k += 1
            if down_at is None or down_at > until:
                break
            trans.append((down_at, DOWN))
            t_up = down_at + rng.randint(self.down_min, self.down_max)
            if self.align_up:
                phase = self.start % period
                t_up += (phase - t_up) % period
        return ChurnScript(tuple(trans))


Churn = Union[ChurnScript, StochasticChurn]


@dataclass(frozen=True)
class NodeConfig:
    id: Hashable
    phys_score: float
    clock: ClockModel = ClockModel()
    churn: Churn = ChurnScript()
    region: int = 0


@dataclass(frozen=True)
class SimConfig:
    nodes: tuple
    max_ratio: float = 1.0
    msg_delay: int = 100
    delay_multiplier: int = 1
    on_timer_cost: int = 0
    on_msg_cost: int = 0
    w: float = 1 / 16
    num_copies: int = 1
    seed: int = 0
    max_virtual_time: int = 200_000
    lossy: bool = False
    loss_prob: float = 0.0
    worst_case_delay: bool = False
    merge_time: Optional[int] = None
    run_to_horizon: bool = False
    settle_time: int = 0
    stable: Optional[Hashable] = None
    scenario: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def max_delay(self) -> int:
        return self.delay_multiplier * self.msg_delay

    @property
    def max_round(self) -> int:
        return 2 * math.ceil(self.max_ratio) + 2

    def node(self, node_id) -> NodeConfig:
        for nc in self.nodes:
            if nc.id == node_id:
                return nc
        raise KeyError(node_id)

    def params_for(self, nc: NodeConfig) -> NodeParams:
        return NodeParams(w=self.w, max_ratio=self.max_ratio,
                          msg_delivery_time=self.max_delay,
                          num_copies=self.num_copies, phys_score=nc.phys_score)

    def stable_node(self) -> Optional[Hashable]:
        if self.stable is not None:
            return self.stable
        for nc in self.nodes:
            if nc.churn.never_fails:
                return nc.id
        return None

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    nodes: tuple = ()
    margin: float = 0.0

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def stream_seed(seed: int, *parts) -> int:
    key = "/".join([str(seed), *map(repr, parts)])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def validate_config(cfg: SimConfig) -> list[Violation]:
    """Every violated constraint; an empty list means the config is valid."""
    out: list[Violation] = []

    def bad(msg, nodes=(), margin=0.0, kind="config"):
        out.append(Violation(kind, msg, tuple(nodes), margin))

    if not cfg.nodes:
        bad("no nodes")
        return out
    ids = [nc.id for nc in cfg.nodes]
    if len(set(ids)) != len(ids):
        bad("duplicate node ids")
    if len({type(i) for i in ids}) > 1:
        bad("node ids must share one type")
    if not cfg.w > 0:
        bad(f"w must be positive, got {cfg.w}")
    if not cfg.max_ratio >= 1:
        bad(f"max_ratio must be >= 1, got {cfg.max_ratio}")
    if not cfg.msg_delay > 0:
        bad("msg_delay must be positive")
    if not (isinstance(cfg.delay_multiplier, int) and cfg.delay_multiplier >= 1):
        bad("delay_multiplier must be a positive integer")
    if cfg.on_timer_cost < 0 or cfg.on_msg_cost < 0:
        bad("processing costs must be non-negative")
    if cfg.num_copies < 1:
        bad("num_copies must be positive")
    if not 0 <= cfg.loss_prob <= 1:
        bad("loss_prob outside [0, 1]")
    if cfg.loss_prob > 0 and not cfg.lossy:
        bad("loss_prob set but lossy mode is off")
    for nc in cfg.nodes:
        if not 0 <= nc.phys_score <= 1:
            bad(f"node {nc.id!r}: phys_score {nc.phys_score} outside [0, 1]", [nc.id])
        if not nc.clock.rate > 0 or nc.clock.round_length <= 0:
            bad(f"node {nc.id!r}: clock rate and round length must be positive", [nc.id])
        for p in nc.churn.problems():
            bad(f"node {nc.id!r}: {p}", [nc.id])
    if out:
        return out

    periods = {nc.id: nc.clock.period for nc in cfg.nodes}
    for u, v in permutations(ids, 2):
        ratio = periods[u] / periods[v]
        if ratio > cfg.max_ratio:
            bad(f"round ratio {periods[u]}/{periods[v]} = {ratio:.4g} of nodes "
                f"{u!r},{v!r} exceeds max_ratio {cfg.max_ratio}",
                [u, v], cfg.max_ratio - ratio, kind="clock-ratio")

    need = (cfg.on_timer_cost + cfg.delay_multiplier * cfg.msg_delay
            + cfg.on_msg_cost * cfg.n * cfg.max_ratio)
    for v in ids:
        if periods[v] < need:
            bad(f"round length {periods[v]} of node {v!r} is below "
                f"on_timer_cost + D*msg_delay + on_msg_cost*n*max_ratio = {need:g}",
                [v], periods[v] - need, kind="round-length")

    if cfg.stable is not None:
        if cfg.stable not in ids:
            bad(f"stable node {cfg.stable!r} is not configured", kind="stable-node")
        elif not cfg.node(cfg.stable).churn.never_fails:
            bad(f"designated stable node {cfg.stable!r} has failures scripted",
                [cfg.stable], kind="stable-node")
    elif cfg.stable_node() is None:
        bad("no node stays up for the whole run", kind="stable-node")

    if cfg.merge_time is not None:
        if len({nc.region for nc in cfg.nodes}) < 2:
            bad("merge_time set but only one region configured")
    elif len({nc.region for nc in cfg.nodes}) > 1:
        bad("several regions configured without a merge_time")
    return out


def require_valid(cfg: SimConfig) -> None:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(map(str, problems)))
