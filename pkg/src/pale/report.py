"""Message-complexity table across network sizes, as CSV, text and a figure."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import asdict, dataclass

from . import engine, metrics, scenarios

LABELS = {"worst": "O(n^2)", "monotonic": "O(n)", "mild": "O(1)"}
FIT_TOLERANCE = 0.15


@dataclass
class RegimeRow:
    n: int
    max_round: int
    mild_total: int
    join_total: int
    leave_total: int
    worst_peak: int
    worst_total: int
    passed: bool


def regime_rows(sizes, seed: int = 0) -> list[RegimeRow]:
    rows = []
    for n in sizes:
        verdicts = {}
        for name, regime in (("mild", "mild"), ("monotonic-join", "monotonic"),
                             ("monotonic-leave", "monotonic"), ("worst", "worst")):
            trace = engine.run(scenarios.builtin(name, n=n, seed=seed))
            verdicts[name] = metrics.measure_messages(trace, regime)
        rows.append(RegimeRow(
            n=n, max_round=trace.sim_config().max_round,
            mild_total=verdicts["mild"].extra["total"],
            join_total=verdicts["monotonic-join"].extra["total"],
            leave_total=verdicts["monotonic-leave"].extra["total"],
            worst_peak=verdicts["worst"].extra["peak"],
            worst_total=verdicts["worst"].extra["total"],
            passed=all(v.passed for v in verdicts.values())))
    return rows


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through (xs, ys) and its worst relative residual."""
    if len(xs) < 2:
        return 0.0, float(ys[0]) if ys else 0.0, 0.0
    slope, intercept = statistics.linear_regression(xs, ys)
    worst = max(abs(y - (slope * x + intercept)) / y for x, y in zip(xs, ys))
    return slope, intercept, worst


def shape_checks(rows: list[RegimeRow]) -> dict[str, bool]:
    ns = [r.n for r in rows]
    out = {
        "mild constant in n": len({r.mild_total for r in rows}) == 1,
        "mild within maxRound": all(r.mild_total <= r.max_round for r in rows),
        "worst peak within n": all(r.worst_peak <= r.n for r in rows),
    }
    for label, ys in (("join", [r.join_total for r in rows]),
                      ("leave", [r.leave_total for r in rows])):
        out[f"{label} within n*maxRound"] = all(y <= r.n * r.max_round for y, r in zip(ys, rows))
        out[f"{label} monotone in n"] = all(a <= b for a, b in zip(ys, ys[1:]))
        out[f"{label} linear fit"] = linear_fit(ns, ys)[2] <= FIT_TOLERANCE
    return out


def to_csv(rows: list[RegimeRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(asdict(rows[0])), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(asdict(r))
    return buf.getvalue()


def to_text(rows: list[RegimeRow]) -> str:
    head = (f"{'n':>4} {'mild ' + LABELS['mild']:>10} {'join ' + LABELS['monotonic']:>10} "
            f"{'leave ' + LABELS['monotonic']:>11} {'worst/round':>11} "
            f"{'worst total':>11} {'n*maxRound':>10}")
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.n:>4} {r.mild_total:>10} {r.join_total:>10} {r.leave_total:>11} "
                     f"{r.worst_peak:>11} {r.worst_total:>11} {r.n * r.max_round:>10}")
    lines.append("")
    ns = [r.n for r in rows]
    for label, ys in (("join", [r.join_total for r in rows]),
                      ("leave", [r.leave_total for r in rows])):
        slope, icept, resid = linear_fit(ns, ys)
        lines.append(f"{label}: total ~ {slope:.3f}*n + {icept:.3f}, "
                     f"max relative residual {resid:.3%}")
    for name, ok in shape_checks(rows).items():
        lines.append(f"{'ok ' if ok else 'BAD'} {name}")
    return "\n".join(lines) + "\n"


def plot_regimes(rows: list[RegimeRow], path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = [r.n for r in rows]
    fig, ax = plt.subplots(figsize=(7.5, 4))
    ax.plot(ns, [r.worst_total for r in rows], "s-", label=f"worst, whole run {LABELS['worst']}")
    ax.plot(ns, [r.join_total for r in rows], "o-", label=f"monotonic join {LABELS['monotonic']}")
    ax.plot(ns, [r.leave_total for r in rows], "^--", label=f"monotonic leave {LABELS['monotonic']}")
    ax.plot(ns, [r.worst_peak for r in rows], "x:", label="worst, peak per round")
    ax.plot(ns, [r.mild_total for r in rows], "d-", label=f"mild {LABELS['mild']}")
    ax.plot(ns, [r.n * r.max_round for r in rows], color="grey", lw=0.8, label="n*maxRound")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xticks(ns, [str(n) for n in ns])
    ax.set_xlabel("nodes")
    ax.set_ylabel("beeps")
    ax.legend(fontsize=7, loc="center left", bbox_to_anchor=(1.02, 0.5))
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
