"""Command line: ``pale run``, ``pale table2``, ``pale replay``, ``pale check``, ``pale scenario``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import engine, metrics, report, scenario_io, scenarios
from .config import ScenarioError, validate_config
from .protocol import ConfigError
from .trace import Trace, TraceFormatError

OUT_ENV = "PALE_OUT"


def default_out() -> str:
    return os.environ.get(OUT_ENV, "pale-out")


def parse_seeds(text: str) -> list[int]:
    """``7`` or an inclusive range ``1..100``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}; use k or k..m") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return list(range(lo, hi + 1))


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return sizes


def load_scenario(ref: str, seed=None):
    """A TOML path or ``builtin:name[:n]``; returns (config, short name)."""
    if ref.startswith("builtin:"):
        parts = ref.split(":")
        n = int(parts[2]) if len(parts) > 2 and parts[2] else None
        return scenarios.builtin(parts[1], n=n, seed=seed or 0), "-".join(parts[1:])
    cfg = scenario_io.load(ref)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg, Path(ref).stem


def _one_run(ref: str, seed, checks) -> tuple:
    cfg, stem = load_scenario(ref, seed)
    trace = engine.run(cfg)
    return cfg.seed, stem, trace.dumps(), [v.to_record() for v in metrics.run_checks(trace, checks)]


def _fail(msg: str) -> int:
    print(f"pale: {msg}", file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    checks = [c.strip() for c in args.check.split(",") if c.strip()]
    unknown = set(checks) - set(metrics.CHECKS) - {"all"}
    if unknown:
        return _fail(f"unknown check(s): {', '.join(sorted(unknown))}")
    seeds = args.seed or [None]
    try:
        cfg, _ = load_scenario(args.scenario, seeds[0])
        problems = validate_config(cfg)
        if problems:
            lines = "\n".join(f"  {p}" for p in problems)
            return _fail(f"{args.scenario} violates the model assumptions:\n{lines}")
    except (ScenarioError, ConfigError, OSError) as exc:
        return _fail(f"{args.scenario}: {exc}")

    out = Path(args.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_one_run, [args.scenario] * len(seeds), seeds,
                                    [checks] * len(seeds)))
    else:
        results = [_one_run(args.scenario, s, checks) for s in seeds]
    results.sort(key=lambda r: r[0])

    failed_runs = 0
    summary, verdict_lines = [], []
    for seed, stem, text, verdicts in results:
        (out / f"{stem}-seed{seed}.jsonl").write_text(text, encoding="utf-8")
        bad = [v for v in verdicts if not v["passed"] and v["severity"] == "error"]
        warn = [v for v in verdicts if not v["passed"] and v["severity"] == "warning"]
        failed_runs += bool(bad)
        for v in verdicts:
            verdict_lines.append(json.dumps({"seed": seed, **v}, sort_keys=True))
        status = "FAIL" if bad else "pass"
        note = ", ".join(f"{v['name']} [{v['witness'][0]}, {v['witness'][1]}]" for v in bad + warn)
        summary.append(f"seed {seed:>5}  {status}  {note}".rstrip())
        if not args.quiet:
            print(summary[-1])
    summary.append(f"{len(results) - failed_runs}/{len(results)} runs passed "
                   f"checks: {','.join(checks)}")
    (out / "verdicts.jsonl").write_text("\n".join(verdict_lines) + "\n", encoding="utf-8")
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    print(summary[-1])
    return 1 if failed_runs else 0


def cmd_table2(args) -> int:
    rows = report.regime_rows(args.sizes, seed=args.seed)
    out = Path(args.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    text = report.to_text(rows)
    (out / "table2.csv").write_text(report.to_csv(rows), encoding="utf-8")
    (out / "table2.txt").write_text(text, encoding="utf-8")
    if not args.no_plot:
        report.plot_regimes(rows, out / "table2.png")
    print(text, end="")
    ok = all(r.passed for r in rows) and all(report.shape_checks(rows).values())
    return 0 if ok else 1


def narrate(trace: Trace, start=None, end=None) -> list[str]:
    """One line per event in the window, with each node's state digest change."""
    last: dict = {}
    lines = []
    for e in trace.events:
        if e.digest is not None or e.kind == "down":
            prev = last.get(e.node)
            last[e.node] = e.digest
        else:
            prev = None
        if (start is not None and e.time < start) or (end is not None and e.time > end):
            continue
        body = ", ".join(f"{k}={v}" for k, v in sorted(e.payload.items()))
        state = ""
        if e.digest is not None:
            state = f"  state {prev or '-'} -> {e.digest}" if prev != e.digest else "  state unchanged"
        who = "" if e.node is None else f" node {e.node}"
        lines.append(f"t={e.time:<8} #{e.seq:<6}{who} {e.kind}: {body}{state}")
    return lines


def cmd_replay(args) -> int:
    try:
        trace = Trace.read(args.trace)
    except (OSError, TraceFormatError) as exc:
        return _fail(f"cannot read trace {args.trace}: {exc}")
    for line in narrate(trace, args.start, args.end):
        print(line)
    return 0


def cmd_check(args) -> int:
    checks = [c.strip() for c in args.check.split(",") if c.strip()]
    try:
        trace = Trace.read(args.trace)
        verdicts = metrics.run_checks(trace, checks)
    except (OSError, TraceFormatError, ScenarioError, ConfigError) as exc:
        return _fail(f"{args.trace}: {exc}")
    for v in verdicts:
        print(v.line())
    return 1 if any(not v.passed and v.severity == "error" for v in verdicts) else 0


def cmd_scenario(args) -> int:
    try:
        cfg = scenarios.builtin(args.name, n=args.n, seed=args.seed)
    except ScenarioError as exc:
        return _fail(str(exc))
    text = scenario_io.dumps(cfg)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pale", description="leader election simulator and trace checker")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and check the traces")
    p.add_argument("--scenario", required=True, help="TOML file or builtin:name[:n]")
    p.add_argument("--seed", type=parse_seeds, help="seed k or inclusive range k..m")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./pale-out)")
    p.add_argument("--check", default="all",
                   help=f"comma list from: all, {', '.join(metrics.CHECKS)}")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes for seed sweeps")
    p.add_argument("--quiet", action="store_true", help="print only the final tally")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table2", help="message counts of the three regimes across sizes")
    p.add_argument("--sizes", type=parse_sizes, default=[4, 8, 16, 32])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./pale-out)")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("replay", help="narrate a trace window")
    p.add_argument("--trace", required=True)
    p.add_argument("--from", dest="start", type=int)
    p.add_argument("--to", dest="end", type=int)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("check", help="run checkers over an existing trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--check", default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scenario", help="write a built-in scenario as TOML")
    p.add_argument("name", choices=sorted(scenarios.BUILTIN))
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
