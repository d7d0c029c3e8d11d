"""Synchrony report over a finished trace.

Which signal feeds which measure:

* state MI (bits): per unordered agent pair, the two conversational-state
  sequences;
* PLV: per unordered pair, the binary speaking indicators;
* attitude MI (nats): per directed pair (i, j), i's dominance toward j
  against j's liking toward i, the two components an interruption by i
  moves;
* convergence: per directed pair and component, the first tick from which
  the component stays within ``epsilon`` over ``window`` ticks.

``lag`` shifts the second series of every MI/PLV pair by that many ticks.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, permutations

from turnsync.config import MetricsSettings, config_from_dict
from turnsync.engine import EVENT_KINDS, Trace
from turnsync.metrics import (
    convergence_tick,
    discrete_mutual_information,
    ksg_mutual_information,
    lagged,
    plv_with_flag,
)

COMPONENTS = ("liking", "dominance")
AGGREGATE_COLUMNS = ("seed", "converged", "convergence_tick", "interruption_count", "mean_state_mi", "mean_plv")


def pair_key(i: str, j: str) -> str:
    return f"{i}|{j}"


def directed_key(i: str, j: str) -> str:
    return f"{i}->{j}"


@dataclass
class SynchronyReport:
    pairwise_state_mi: dict[str, float]
    pairwise_plv: dict[str, float | None]
    attitude_mi: dict[str, float | None]
    convergence: dict[str, dict[str, int | None]]
    window: int
    epsilon: float
    k: int
    lag: int
    plv_degenerate: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.convergence) and all(
            t is not None for comps in self.convergence.values() for t in comps.values()
        )

    @property
    def convergence_tick(self) -> int | None:
        """Tick by which every attitude component has settled, if all did."""
        if not self.converged:
            return None
        return max(t for comps in self.convergence.values() for t in comps.values())

    def to_dict(self) -> dict:
        return {
            "pairwise_state_mi": self.pairwise_state_mi,
            "pairwise_plv": self.pairwise_plv,
            "plv_degenerate": self.plv_degenerate,
            "attitude_mi": self.attitude_mi,
            "convergence": self.convergence,
            "converged": self.converged,
            "convergence_tick": self.convergence_tick,
            "window": self.window,
            "epsilon": self.epsilon,
            "k": self.k,
            "lag": self.lag,
        }

    def csv_rows(self) -> list[dict]:
        rows = []
        for key, v in self.pairwise_state_mi.items():
            i, j = key.split("|")
            rows.append({"metric": "state_mi_bits", "source": i, "target": j, "value": v})
        for key, v in self.pairwise_plv.items():
            i, j = key.split("|")
            rows.append({"metric": "plv", "source": i, "target": j, "value": v})
        for key, v in self.attitude_mi.items():
            i, j = key.split("->")
            rows.append({"metric": "attitude_mi_nats", "source": i, "target": j, "value": v})
        for key, comps in self.convergence.items():
            i, j = key.split("->")
            for comp, t in comps.items():
                rows.append({"metric": f"convergence_tick_{comp}", "source": i, "target": j, "value": t})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=("metric", "source", "target", "value"), lineterminator="\n")
        w.writeheader()
        for row in self.csv_rows():
            w.writerow({k: "" if v is None else v for k, v in row.items()})
        return buf.getvalue()


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def analyze(trace: Trace, metrics: MetricsSettings | None = None, lag: int | None = None) -> SynchronyReport:
    if metrics is None:
        metrics = config_from_dict(trace.config).metrics
    if lag is None:
        lag = metrics.lag
    ids = trace.agent_ids
    records = trace.records

    states = {i: [int(r.states[i]) for r in records] for i in ids}
    speaking = {i: [1.0 if r.speaking[i] else 0.0 for r in records] for i in ids}
    att = {
        (i, j): {c: [getattr(r.attitudes[(i, j)], c) for r in records] for c in COMPONENTS}
        for i, j in permutations(ids, 2)
    }

    state_mi, plv, degenerate = {}, {}, []
    for i, j in combinations(ids, 2):
        key = pair_key(i, j)
        a, b = lagged(states[i], states[j], lag)
        state_mi[key] = discrete_mutual_information(a, b) if a else None
        a, b = lagged(speaking[i], speaking[j], lag)
        if len(a) >= 20:
            plv[key], flag = plv_with_flag(a, b)
            if flag:
                degenerate.append(key)
        else:
            plv[key] = None

    attitude_mi, convergence = {}, {}
    for i, j in permutations(ids, 2):
        a, b = lagged(att[(i, j)]["dominance"], att[(j, i)]["liking"], lag)
        attitude_mi[directed_key(i, j)] = (
            ksg_mutual_information(a, b, metrics.k, jitter=metrics.ksg_jitter) if len(a) > metrics.k else None
        )
        convergence[directed_key(i, j)] = {
            c: convergence_tick(att[(i, j)][c], metrics.window, metrics.epsilon) for c in COMPONENTS
        }

    return SynchronyReport(
        pairwise_state_mi=state_mi,
        pairwise_plv=plv,
        attitude_mi=attitude_mi,
        convergence=convergence,
        window=metrics.window,
        epsilon=metrics.epsilon,
        k=metrics.k,
        lag=lag,
        plv_degenerate=degenerate,
    )


def event_counts(trace: Trace) -> dict[str, int]:
    counts = Counter(e.kind for e in trace.events())
    return {kind: counts.get(kind, 0) for kind in EVENT_KINDS}


def report_file(trace: Trace, report: SynchronyReport, trace_sha256: str, wall_time_s: float) -> dict:
    return {
        "config_digest": config_from_dict(trace.config).digest(),
        "trace_digest": trace_sha256,
        "seed": trace.seed,
        "ticks": len(trace.records) - 1,
        "event_counts": event_counts(trace),
        "report": report.to_dict(),
        "wall_time_s": wall_time_s,
    }


def aggregate_row(seed: int, trace: Trace, report: SynchronyReport) -> dict:
    return {
        "seed": seed,
        "converged": report.converged,
        "convergence_tick": report.convergence_tick,
        "interruption_count": event_counts(trace)["Interruption"],
        "mean_state_mi": _mean(report.pairwise_state_mi.values()),
        "mean_plv": _mean(report.pairwise_plv.values()),
    }
