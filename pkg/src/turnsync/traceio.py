"""JSON Lines trace persistence.

Line 1 is a header ``{"config": <resolved config>, "seed": <int>}``; every
following line is one tick record with the fields ``tick``, ``states``,
``cues``, ``attitudes`` and ``events``.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import IO, Union

from turnsync.dialogue import AttitudeMatrix, ConversationalState
from turnsync.engine import Event, TickRecord, Trace
from turnsync.errors import TraceFormatError
from turnsync.perception import CueVector

PathOrFile = Union[str, os.PathLike, IO[str]]

RECORD_FIELDS = ("tick", "states", "cues", "attitudes", "events")


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def record_to_dict(r: TickRecord) -> dict:
    return {
        "tick": r.tick,
        "states": {i: s.name for i, s in r.states.items()},
        "cues": {i: c.to_dict() for i, c in r.cues.items()},
        "attitudes": r.attitudes.to_dict(),
        "events": [e.to_dict() for e in r.events],
    }


def dumps_trace(trace: Trace) -> str:
    lines = [_dumps({"config": trace.config, "seed": trace.seed})]
    lines.extend(_dumps(record_to_dict(r)) for r in trace.records)
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, sink: PathOrFile) -> str:
    """Write ``trace`` and return the sha256 of the bytes written."""
    text = dumps_trace(trace)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sink.write(text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _record_from_dict(d, line: int, expected_tick: int) -> TickRecord:
    if not isinstance(d, dict):
        raise TraceFormatError("tick record must be a JSON object", line)
    missing = [f for f in RECORD_FIELDS if f not in d]
    if missing:
        raise TraceFormatError(f"missing fields {missing}", line)
    if d["tick"] != expected_tick:
        raise TraceFormatError(f"expected tick {expected_tick}, got {d['tick']!r}", line)
    try:
        return TickRecord(
            tick=d["tick"],
            states={i: ConversationalState[s] for i, s in d["states"].items()},
            cues={i: CueVector.from_dict(c) for i, c in d["cues"].items()},
            attitudes=AttitudeMatrix.from_dict(d["attitudes"]),
            events=[Event.from_dict(e) for e in d["events"]],
        )
    except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
        raise TraceFormatError(f"malformed tick record: {exc!r}", line) from None


def loads_trace(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("empty trace: header line missing", 1)
    parsed = []
    for n, raw in enumerate(lines, start=1):
        try:
            parsed.append(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON ({exc.msg})", n) from None
    header = parsed[0]
    if not isinstance(header, dict) or set(header) != {"config", "seed"}:
        raise TraceFormatError("header must be an object with 'config' and 'seed'", 1)
    records = [_record_from_dict(d, t + 2, t) for t, d in enumerate(parsed[1:])]
    return Trace(header["config"], header["seed"], records)


def read_trace(source: PathOrFile) -> Trace:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return loads_trace(fh.read())
    return loads_trace(source.read())


def trace_digest(trace: Trace) -> str:
    return hashlib.sha256(dumps_trace(trace).encode("utf-8")).hexdigest()
