"""An election node as a transport-free state machine.

A node reacts to exactly two events, the expiry of its round timer and the
arrival of a beep from another node, and answers each with a list of
actions for the embedding transport to carry out.  Handlers update the
state object in place and return it alongside the actions; they never read
a clock or touch a network, so the caller supplies the local time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Optional, Union

from .digest import digest
from .plist import ParticipantList, PLEntry, entry_key

INFINITY = math.inf
WEI_MAX = 7.9  # top of the Windows Experience Index scale


class ConfigError(ValueError):
    pass


def compute_rank(w: float, pl0_del_cnt: int, phys_score: float) -> float:
    return w * pl0_del_cnt + phys_score


def phys_score_from_components(ram: float, processor: float, disk: float,
                               aggregate=min) -> float:
    """Normalised physical score from three component scores in [1.0, 7.9]."""
    for s in (ram, processor, disk):
        if not 1.0 <= s <= WEI_MAX:
            raise ConfigError(f"component score {s} outside [1.0, {WEI_MAX}]")
    return aggregate((ram, processor, disk)) / WEI_MAX


@dataclass(frozen=True)
class NodeParams:
    w: float = 1 / 16
    max_ratio: float = 1.0
    msg_delivery_time: int = 1
    num_copies: int = 1
    phys_score: float = 1.0

    def __post_init__(self):
        if not self.w > 0:
            raise ConfigError(f"w must be positive, got {self.w}")
        if not self.max_ratio >= 1:
            raise ConfigError(f"max_ratio must be >= 1, got {self.max_ratio}")
        if self.num_copies < 1:
            raise ConfigError("num_copies must be positive")
        if not 0.0 <= self.phys_score <= 1.0:
            raise ConfigError(f"phys_score must lie in [0, 1], got {self.phys_score}")

    @property
    def stale_rounds(self) -> int:
        return math.ceil(self.max_ratio)

    @property
    def max_round(self) -> int:
        return 2 * math.ceil(self.max_ratio) + 2


@dataclass(frozen=True)
class BeepMsg:
    time: float
    rank: float
    id: Hashable
    round: int
    tie: Optional[tuple] = None


@dataclass(frozen=True)
class Broadcast:
    msg: BeepMsg
    copies: int = 1


@dataclass(frozen=True)
class Handshake:
    target: Hashable


@dataclass(frozen=True)
class BecameLeader:
    rounds_as_leading: int
    tie: tuple


@dataclass(frozen=True)
class Rejected:
    reason: str


NodeAction = Union[Broadcast, Handshake, BecameLeader, Rejected]


@dataclass(eq=False)
class NodeState:
    id: Hashable
    params: NodeParams
    pl: ParticipantList = field(default_factory=ParticipantList)
    cnt_rounds: int = 0
    rounds_as_leading: int = 0
    pl0_del_cnt: int = 0
    last_lead_msg: int = 0
    iam_leader: bool = False
    rank: float = 0.0
    tie: Optional[tuple] = None
    # current handshake target; cleared when that entry is dropped as failed
    link: Optional[Hashable] = None

    @property
    def best(self) -> PLEntry:
        return self.pl.peek_best()

    def digest(self) -> str:
        entries = [(e.id, e.rank, e.round, e.time, e.tie) for e in self.pl]
        return digest(entries, self.cnt_rounds, self.rounds_as_leading,
                      self.pl0_del_cnt, self.last_lead_msg, self.iam_leader,
                      self.rank, self.link)


def _beep(state: NodeState, now: float) -> Broadcast:
    msg = BeepMsg(now, state.rank, state.id, state.rounds_as_leading,
                  state.tie if state.iam_leader else None)
    # the node's own entry mirrors whatever it last announced
    state.pl.insert_or_update(PLEntry(state.id, msg.rank, msg.round, now, msg.tie))
    return Broadcast(msg, state.params.num_copies)


def _drop_best(state: NodeState, now: float) -> None:
    gone = state.pl.peek_best().id
    state.pl.delete_best()
    if state.link == gone:
        state.link = None
    state.pl0_del_cnt += 1
    p = state.params
    state.rank = compute_rank(p.w, state.pl0_del_cnt, p.phys_score)
    state.pl.insert_or_update(PLEntry(state.id, state.rank, 0, now))


def init_node(params: NodeParams, self_id: Hashable, now: float):
    state = NodeState(self_id, params)
    state.rank = compute_rank(params.w, 0, params.phys_score)
    return state, [_beep(state, now)]


def on_round_timer(state: NodeState, now: float):
    if state.iam_leader:
        return state, [_beep(state, now)]

    state.cnt_rounds += 1
    if (state.best.id != state.id
            and state.cnt_rounds - state.last_lead_msg > state.params.stale_rounds):
        _drop_best(state, now)

    if state.best.id != state.id:
        return state, []

    actions: list = []
    state.rounds_as_leading += 1
    if state.rounds_as_leading == state.params.max_round:
        state.tie = (state.rank, state.cnt_rounds, state.id)
        state.rank = INFINITY
        state.iam_leader = True
        actions.append(BecameLeader(state.rounds_as_leading, state.tie))
    actions.append(_beep(state, now))
    return state, actions


def _malformed(state: NodeState, msg) -> Optional[str]:
    if not isinstance(msg, BeepMsg):
        return "not a beep message"
    if msg.id is None:
        return "missing sender id"
    if msg.id == state.id:
        return "message from self"
    if not isinstance(msg.round, int) or msg.round < 0:
        return f"bad round {msg.round!r}"
    if not (msg.rank >= 0):
        return f"bad rank {msg.rank!r}"
    if math.isnan(msg.time):
        return "bad timestamp"
    return None


def on_beep_received(state: NodeState, msg: BeepMsg, now: float):
    reason = _malformed(state, msg)
    if reason is not None:
        return state, [Rejected(reason)]

    best = state.best
    if best.id == msg.id and best.round > msg.round and best.time < msg.time:
        # the sender restarted since its last beep
        _drop_best(state, now)
        best = state.best

    if best.id == state.id and entry_key(msg.rank, msg.tie, msg.id) > best.key:
        state.rounds_as_leading = 0

    state.pl.insert_or_update(PLEntry(msg.id, msg.rank, msg.round, msg.time, msg.tie))
    actions: list = []
    if state.best.id == msg.id:
        if msg.round >= state.params.max_round and state.link != msg.id:
            state.link = msg.id
            actions.append(Handshake(msg.id))
        state.last_lead_msg = state.cnt_rounds
    return state, actions
