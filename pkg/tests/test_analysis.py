import csv
import io

import pytest

from conftest import make_config
from turnsync.analysis import AGGREGATE_COLUMNS, aggregate_row, analyze, event_counts, report_file
from turnsync.engine import run
from turnsync.traceio import trace_digest


@pytest.fixture(scope="module")
def triad():
    config = make_config(agents=[{"id": i, "talkativeness": 0.1} for i in "ABC"], run={"ticks": 1500, "seed": 2})
    trace = run(config)
    return trace, analyze(trace)


def test_keys(triad):
    _, r = triad
    assert set(r.pairwise_state_mi) == {"A|B", "A|C", "B|C"}
    assert set(r.pairwise_plv) == {"A|B", "A|C", "B|C"}
    assert set(r.attitude_mi) == {"A->B", "A->C", "B->A", "B->C", "C->A", "C->B"}
    assert all(set(c) == {"liking", "dominance"} for c in r.convergence.values())


def test_value_ranges(triad):
    _, r = triad
    assert all(v >= 0 for v in r.pairwise_state_mi.values())
    assert all(0 <= v <= 1 for v in r.pairwise_plv.values())
    assert all(v >= -0.05 for v in r.attitude_mi.values())


def test_convergence_aggregate(triad):
    _, r = triad
    ticks = [t for c in r.convergence.values() for t in c.values()]
    if r.converged:
        assert r.convergence_tick == max(ticks)
    else:
        assert r.convergence_tick is None and None in ticks


def test_deterministic(triad):
    trace, r = triad
    assert analyze(trace).to_dict() == r.to_dict()


def test_lag_changes_pairing(triad):
    trace, r = triad
    shifted = analyze(trace, lag=3)
    assert shifted.lag == 3
    assert shifted.pairwise_state_mi != r.pairwise_state_mi


def test_csv(triad):
    _, r = triad
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert {row["metric"] for row in rows} == {
        "state_mi_bits", "plv", "attitude_mi_nats", "convergence_tick_liking", "convergence_tick_dominance",
    }
    assert len(rows) == 3 + 3 + 6 + 12


def test_silent_dyad_is_degenerate():
    trace = run(make_config(agents=[{"id": "A", "talkativeness": 0}, {"id": "B", "talkativeness": 0}],
                            run={"ticks": 600}))
    r = analyze(trace)
    assert r.pairwise_plv == {"A|B": 0.0}
    assert r.plv_degenerate == ["A|B"]
    assert r.pairwise_state_mi == {"A|B": 0.0}
    # Attitudes never move: converged at the first possible tick.
    assert r.converged and r.convergence_tick == 500


def test_report_file_and_row(triad):
    trace, r = triad
    doc = report_file(trace, r, trace_digest(trace), 0.5)
    assert doc["seed"] == 2 and doc["ticks"] == 1500
    assert doc["event_counts"] == event_counts(trace)
    assert sum(doc["event_counts"].values()) == len(trace.events())
    row = aggregate_row(2, trace, r)
    assert tuple(row) == AGGREGATE_COLUMNS
    assert row["interruption_count"] == len(trace.events("Interruption"))
