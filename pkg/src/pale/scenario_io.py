"""Scenario files: TOML with top-level run settings and one ``[[node]]`` block per node.

Example::

    seed = 7
    max_ratio = 1.0
    msg_delay = 100          # virtual ticks
    w = 0.0625
    max_virtual_time = 50000

    [scenario]
    name = "static"

    [[node]]
    id = 1
    phys_score = 0.9
    round_length = 1000      # local clock ticks
    rate = 1.0
    churn = [[0, "up"], [4300, "down"], [4800, "up"]]

    [[node]]
    id = 2
    phys_score = 0.4
    [node.stochastic]
    fail_prob = 0.05
    down_min = 200
    down_max = 900

Omitting ``churn`` and ``stochastic`` keeps a node up from time 0.
The same dictionary layout is embedded in trace files.
"""

from __future__ import annotations

from typing import Any

import tomlkit
from tomlkit.exceptions import ParseError

from .config import (ChurnScript, ClockModel, NodeConfig, ScenarioError,
                     SimConfig, StochasticChurn)


_TOP = {
    "seed": int, "max_ratio": float, "msg_delay": int, "delay_multiplier": int,
    "on_timer_cost": int, "on_msg_cost": int, "w": float, "num_copies": int,
    "max_virtual_time": int, "lossy": bool, "loss_prob": float,
    "worst_case_delay": bool, "merge_time": int, "run_to_horizon": bool,
    "settle_time": int, "stable": None,
}
_NODE = {"id", "phys_score", "region", "rate", "round_length", "offset",
         "churn", "stochastic"}
_STOCH = {"fail_prob": float, "down_min": int, "down_max": int, "start": int,
          "until": int, "align_up": bool}


def _coerce(where: str, value: Any, typ):
    if typ is None:
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ScenarioError(f"{where}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ScenarioError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def config_to_dict(cfg: SimConfig) -> dict:
    out: dict[str, Any] = {}
    for key in _TOP:
        value = getattr(cfg, key)
        if value is not None:
            out[key] = value
    if cfg.scenario:
        out["scenario"] = dict(cfg.scenario)
    nodes = []
    for nc in cfg.nodes:
        d: dict[str, Any] = {"id": nc.id, "phys_score": nc.phys_score,
                             "region": nc.region, "rate": nc.clock.rate,
                             "round_length": nc.clock.round_length,
                             "offset": nc.clock.offset}
        if isinstance(nc.churn, StochasticChurn):
            d["stochastic"] = {k: getattr(nc.churn, k) for k in _STOCH
                               if getattr(nc.churn, k) is not None}
        else:
            d["churn"] = [[t, kind] for t, kind in nc.churn.transitions]
        nodes.append(d)
    out["node"] = nodes
    return out


def config_from_dict(data: dict) -> SimConfig:
    unknown = set(data) - set(_TOP) - {"node", "scenario"}
    if unknown:
        raise ScenarioError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    kwargs = {k: _coerce(k, data[k], typ) for k, typ in _TOP.items() if k in data}
    raw_nodes = data.get("node")
    if not raw_nodes:
        raise ScenarioError("node: at least one [[node]] block is required")
    nodes = []
    for i, nd in enumerate(raw_nodes):
        where = f"node[{i}]"
        extra = set(nd) - _NODE
        if extra:
            raise ScenarioError(f"{where}: unknown field(s): {', '.join(sorted(extra))}")
        if "id" not in nd or "phys_score" not in nd:
            raise ScenarioError(f"{where}: 'id' and 'phys_score' are required")
        clock = ClockModel(
            rate=_coerce(f"{where}.rate", nd.get("rate", 1.0), float),
            round_length=_coerce(f"{where}.round_length", nd.get("round_length", 1000), int),
            offset=_coerce(f"{where}.offset", nd.get("offset", 0.0), float))
        if "stochastic" in nd and "churn" in nd:
            raise ScenarioError(f"{where}: give either 'churn' or 'stochastic', not both")
        if "stochastic" in nd:
            st = nd["stochastic"]
            bad = set(st) - set(_STOCH)
            if bad:
                raise ScenarioError(f"{where}.stochastic: unknown field(s): {', '.join(sorted(bad))}")
            try:
                churn = StochasticChurn(**{k: _coerce(f"{where}.stochastic.{k}", v, _STOCH[k])
                                           for k, v in st.items()})
            except TypeError as exc:
                raise ScenarioError(f"{where}.stochastic: {exc}") from None
        else:
            trans = []
            for j, item in enumerate(nd.get("churn", [[0, "up"]])):
                if not (isinstance(item, (list, tuple)) and len(item) == 2):
                    raise ScenarioError(f"{where}.churn[{j}]: expected [time, \"up\"|\"down\"]")
                trans.append((_coerce(f"{where}.churn[{j}]", item[0], int), str(item[1])))
            churn = ChurnScript(tuple(trans))
        nodes.append(NodeConfig(
            id=nd["id"],
            phys_score=_coerce(f"{where}.phys_score", nd["phys_score"], float),
            clock=clock, churn=churn,
            region=_coerce(f"{where}.region", nd.get("region", 0), int)))
    scenario = dict(data.get("scenario", {}))
    return SimConfig(nodes=tuple(nodes), scenario=scenario, **kwargs)


def loads(text: str) -> SimConfig:
    try:
        doc = tomlkit.parse(text).unwrap()
    except ParseError as exc:
        raise ScenarioError(f"line {exc.line}, column {exc.col}: {exc}") from None
    return config_from_dict(doc)


def load(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dumps(cfg: SimConfig) -> str:
    return tomlkit.dumps(config_to_dict(cfg))


def dump(cfg: SimConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))
