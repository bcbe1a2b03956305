"""Trace records and their newline-delimited JSON encoding.

The first line of a trace file is a ``config`` record carrying the full
simulation config, so a trace can be checked or replayed on its own.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Optional

from .protocol import BeepMsg


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    time: int
    node: Optional[Hashable]
    kind: str
    payload: dict
    digest: Optional[str] = None

    def to_record(self) -> dict:
        return {"seq": self.seq, "time": self.time, "node": self.node,
                "kind": self.kind, "payload": self.payload,
                "stateDigest": self.digest}


def encode_rank(rank: float):
    return "inf" if math.isinf(rank) else rank


def decode_rank(value) -> float:
    return math.inf if value == "inf" else float(value)


def msg_to_dict(msg: BeepMsg) -> dict:
    return {"time": msg.time, "rank": encode_rank(msg.rank), "id": msg.id,
            "round": msg.round, "tie": list(msg.tie) if msg.tie is not None else None}


def msg_from_dict(d: dict) -> BeepMsg:
    tie = d.get("tie")
    return BeepMsg(float(d["time"]), decode_rank(d["rank"]), d["id"], d["round"],
                   tuple(tie) if tie is not None else None)


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


class Trace:
    def __init__(self, config: dict, events: Iterable[TraceEvent] = ()):
        self.config = config
        self.events = list(events)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    def window(self, start: Optional[int] = None, end: Optional[int] = None):
        return [e for e in self.events
                if (start is None or e.time >= start) and (end is None or e.time <= end)]

    def sim_config(self):
        from .scenario_io import config_from_dict
        return config_from_dict(self.config)

    def dumps(self) -> str:
        lines = [_dumps({"seq": -1, "time": 0, "node": None, "kind": "config",
                         "payload": self.config, "stateDigest": None})]
        lines.extend(_dumps(e.to_record()) for e in self.events)
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        config, events = None, []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if rec["kind"] == "config":
                    config = rec["payload"]
                    continue
                events.append(TraceEvent(rec["seq"], rec["time"], rec["node"],
                                         rec["kind"], rec["payload"], rec.get("stateDigest")))
            except (ValueError, KeyError, TypeError) as exc:
                raise TraceFormatError(f"line {lineno}: {exc}") from exc
        if config is None:
            raise TraceFormatError("trace has no config record")
        return cls(config, events)

    @classmethod
    def read(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())
