"""Scenario configuration: YAML document <-> fully resolved ``SimConfig``.

A minimal document only has to name the agents::

    agents: [A, B]

Everything else falls back to the defaults below. Validation errors carry
the dotted path of the offending field, e.g. ``agents.1.talkativeness``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from turnsync.dialogue import AttitudeMatrix, Attitude, AttitudeUpdateParams, ConversationalState
from turnsync.errors import ConfigError
from turnsync.perception import CHANNELS, EmissionModel, sticky_transition_matrix

MODES = ("inferred", "oracle")
PRESETS = ("default", "ideal")


@dataclass(frozen=True)
class AgentSpec:
    id: str
    talkativeness: float = 0.05
    initial_state: ConversationalState = ConversationalState.Unaddressed


@dataclass(frozen=True)
class AttitudeOverride:
    source: str
    target: str
    liking: float
    dominance: float


@dataclass(frozen=True)
class InitialAttitudes:
    liking: float = 0.0
    dominance: float = 0.0
    overrides: tuple[AttitudeOverride, ...] = ()


@dataclass(frozen=True)
class Dynamics:
    delta_dominance: float = 0.1
    delta_liking: float = 0.1
    yield_threshold: float = 0.0
    mean_utterance_ticks: float = 20.0


@dataclass(frozen=True)
class Perception:
    mode: str = "inferred"
    noise_flip: float = 0.02
    emission_preset: str = "default"
    emission: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    hmm_stay_probability: float = 0.8


@dataclass(frozen=True)
class RunSettings:
    ticks: int = 5000
    seed: int = 0


@dataclass(frozen=True)
class MetricsSettings:
    window: int = 500
    epsilon: float = 0.05
    k: int = 4
    lag: int = 0
    ksg_jitter: bool = True


@dataclass(frozen=True)
class SimConfig:
    agents: tuple[AgentSpec, ...]
    initial_attitudes: InitialAttitudes = InitialAttitudes()
    dynamics: Dynamics = Dynamics()
    perception: Perception = Perception()
    run: RunSettings = RunSettings()
    metrics: MetricsSettings = MetricsSettings()

    @property
    def agent_ids(self) -> list[str]:
        return sorted(a.id for a in self.agents)

    def attitude_matrix(self) -> AttitudeMatrix:
        ia = self.initial_attitudes
        m = AttitudeMatrix.uniform(self.agent_ids, ia.liking, ia.dominance)
        return m.replace({(o.source, o.target): Attitude(o.liking, o.dominance) for o in ia.overrides})

    def update_params(self) -> AttitudeUpdateParams:
        return AttitudeUpdateParams(self.dynamics.delta_dominance, self.dynamics.delta_liking)

    def emission_model(self) -> EmissionModel:
        p = self.perception
        base = EmissionModel.ideal if p.emission_preset == "ideal" else EmissionModel.default
        overrides = {ConversationalState[s]: chans for s, chans in p.emission.items()}
        return base(p.noise_flip).with_overrides(overrides)

    def hmm_transition(self):
        return sticky_transition_matrix(self.perception.hmm_stay_probability)

    def with_run(self, ticks: int | None = None, seed: int | None = None) -> "SimConfig":
        r = RunSettings(
            self.run.ticks if ticks is None else _int(ticks, "run.ticks", lo=0),
            self.run.seed if seed is None else _int(seed, "run.seed", lo=0),
        )
        return SimConfig(self.agents, self.initial_attitudes, self.dynamics, self.perception, r, self.metrics)

    def to_dict(self) -> dict[str, Any]:
        ia = self.initial_attitudes
        p = self.perception
        return {
            "agents": [
                {"id": a.id, "talkativeness": a.talkativeness, "initial_state": a.initial_state.name}
                for a in self.agents
            ],
            "initial_attitudes": {
                "liking": ia.liking,
                "dominance": ia.dominance,
                "overrides": [
                    {"source": o.source, "target": o.target, "liking": o.liking, "dominance": o.dominance}
                    for o in ia.overrides
                ],
            },
            "dynamics": dict(vars(self.dynamics)),
            "perception": {
                "mode": p.mode,
                "noise_flip": p.noise_flip,
                "emission_preset": p.emission_preset,
                "emission": {s: dict(c) for s, c in p.emission.items()},
                "hmm_stay_probability": p.hmm_stay_probability,
            },
            "run": dict(vars(self.run)),
            "metrics": dict(vars(self.metrics)),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --- validation helpers -------------------------------------------------------

def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _mapping(v, path: str, allowed: tuple[str, ...]) -> Mapping:
    if v is None:
        return {}
    if not isinstance(v, Mapping):
        raise ConfigError(f"expected a mapping, got {type(v).__name__}", path or None)
    for k in v:
        if k not in allowed:
            raise ConfigError("unknown key", _join(path, k))
    return v


def _real(v, path: str, lo: float | None = None, hi: float | None = None, open_lo: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path)
    v = float(v)
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigError("must be finite", path)
    if lo is not None and (v <= lo if open_lo else v < lo):
        raise ConfigError(f"must be {'>' if open_lo else '>='} {lo}, got {v}", path)
    if hi is not None and v > hi:
        raise ConfigError(f"must be <= {hi}, got {v}", path)
    return v


def _int(v, path: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}, got {v}", path)
    return v


def _bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"expected true/false, got {v!r}", path)
    return v


def _choice(v, path: str, choices: tuple[str, ...]) -> str:
    if v not in choices:
        raise ConfigError(f"must be one of {list(choices)}, got {v!r}", path)
    return v


def _agent_id(v, path: str) -> str:
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise ConfigError(f"agent id must be a string, got {v!r}", path)
    return str(v)


def _state(v, path: str) -> ConversationalState:
    if not isinstance(v, str) or v not in ConversationalState.__members__:
        raise ConfigError(f"unknown conversational state {v!r}", path)
    return ConversationalState[v]


# --- sections -----------------------------------------------------------------

def _agents(raw) -> tuple[AgentSpec, ...]:
    if raw is None:
        raise ConfigError("at least 2 required", "agents")
    if not isinstance(raw, list):
        raise ConfigError("expected a list", "agents")
    specs = []
    for n, item in enumerate(raw):
        path = f"agents.{n}"
        if isinstance(item, Mapping):
            d = _mapping(item, path, ("id", "talkativeness", "initial_state"))
            if "id" not in d:
                raise ConfigError("missing required key", _join(path, "id"))
            specs.append(AgentSpec(
                _agent_id(d["id"], _join(path, "id")),
                _real(d.get("talkativeness", 0.05), _join(path, "talkativeness"), 0.0, 1.0),
                _state(d.get("initial_state", "Unaddressed"), _join(path, "initial_state")),
            ))
        else:
            specs.append(AgentSpec(_agent_id(item, path)))
    if len(specs) < 2:
        raise ConfigError("at least 2 required", "agents")
    seen = set()
    for n, s in enumerate(specs):
        if s.id in seen:
            raise ConfigError(f"duplicate agent id {s.id!r}", f"agents.{n}.id")
        seen.add(s.id)
    return tuple(sorted(specs, key=lambda s: s.id))


def _initial_attitudes(raw, ids: set[str]) -> InitialAttitudes:
    path = "initial_attitudes"
    d = _mapping(raw, path, ("liking", "dominance", "overrides"))
    liking = _real(d.get("liking", 0.0), _join(path, "liking"), -1.0, 1.0)
    dominance = _real(d.get("dominance", 0.0), _join(path, "dominance"), -1.0, 1.0)
    overrides = []
    raw_o = d.get("overrides") or []
    if not isinstance(raw_o, list):
        raise ConfigError("expected a list", _join(path, "overrides"))
    seen = set()
    for n, o in enumerate(raw_o):
        op = f"{path}.overrides.{n}"
        o = _mapping(o, op, ("source", "target", "liking", "dominance"))
        for key in ("source", "target"):
            if key not in o:
                raise ConfigError("missing required key", _join(op, key))
        src = _agent_id(o["source"], _join(op, "source"))
        tgt = _agent_id(o["target"], _join(op, "target"))
        for key, v in (("source", src), ("target", tgt)):
            if v not in ids:
                raise ConfigError(f"unknown agent id {v!r}", _join(op, key))
        if src == tgt:
            raise ConfigError("source and target must differ", op)
        if (src, tgt) in seen:
            raise ConfigError(f"duplicate override for {src}->{tgt}", op)
        seen.add((src, tgt))
        overrides.append(AttitudeOverride(
            src, tgt,
            _real(o.get("liking", liking), _join(op, "liking"), -1.0, 1.0),
            _real(o.get("dominance", dominance), _join(op, "dominance"), -1.0, 1.0),
        ))
    overrides.sort(key=lambda o: (o.source, o.target))
    return InitialAttitudes(liking, dominance, tuple(overrides))


def _dynamics(raw) -> Dynamics:
    path = "dynamics"
    d = _mapping(raw, path, tuple(vars(Dynamics())))
    dflt = Dynamics()
    return Dynamics(
        _real(d.get("delta_dominance", dflt.delta_dominance), _join(path, "delta_dominance"), 0.0, open_lo=True),
        _real(d.get("delta_liking", dflt.delta_liking), _join(path, "delta_liking"), 0.0, open_lo=True),
        _real(d.get("yield_threshold", dflt.yield_threshold), _join(path, "yield_threshold")),
        _real(d.get("mean_utterance_ticks", dflt.mean_utterance_ticks), _join(path, "mean_utterance_ticks"), 1.0),
    )


def _perception(raw) -> Perception:
    path = "perception"
    dflt = Perception()
    d = _mapping(raw, path, ("mode", "noise_flip", "emission_preset", "emission", "hmm_stay_probability"))
    emission = {}
    ep = _join(path, "emission")
    for state, chans in _mapping(d.get("emission"), ep, tuple(ConversationalState.__members__)).items():
        sp = _join(ep, state)
        emission[state] = {
            ch: _real(v, _join(sp, ch), 0.0, 1.0)
            for ch, v in _mapping(chans, sp, CHANNELS).items()
        }
    return Perception(
        _choice(d.get("mode", dflt.mode), _join(path, "mode"), MODES),
        _real(d.get("noise_flip", dflt.noise_flip), _join(path, "noise_flip"), 0.0, 1.0),
        _choice(d.get("emission_preset", dflt.emission_preset), _join(path, "emission_preset"), PRESETS),
        emission,
        _real(d.get("hmm_stay_probability", dflt.hmm_stay_probability), _join(path, "hmm_stay_probability"), 0.0, 1.0),
    )


def _run(raw) -> RunSettings:
    d = _mapping(raw, "run", ("ticks", "seed"))
    dflt = RunSettings()
    return RunSettings(_int(d.get("ticks", dflt.ticks), "run.ticks", 0), _int(d.get("seed", dflt.seed), "run.seed", 0))


def _metrics(raw) -> MetricsSettings:
    d = _mapping(raw, "metrics", tuple(vars(MetricsSettings())))
    dflt = MetricsSettings()
    return MetricsSettings(
        _int(d.get("window", dflt.window), "metrics.window", 2),
        _real(d.get("epsilon", dflt.epsilon), "metrics.epsilon", 0.0, open_lo=True),
        _int(d.get("k", dflt.k), "metrics.k", 1),
        _int(d.get("lag", dflt.lag), "metrics.lag"),
        _bool(d.get("ksg_jitter", dflt.ksg_jitter), "metrics.ksg_jitter"),
    )


def config_from_dict(data: Mapping) -> SimConfig:
    d = _mapping(data, "", ("agents", "initial_attitudes", "dynamics", "perception", "run", "metrics"))
    agents = _agents(d.get("agents"))
    ids = {a.id for a in agents}
    return SimConfig(
        agents=agents,
        initial_attitudes=_initial_attitudes(d.get("initial_attitudes"), ids),
        dynamics=_dynamics(d.get("dynamics")),
        perception=_perception(d.get("perception")),
        run=_run(d.get("run")),
        metrics=_metrics(d.get("metrics")),
    )


def parse_config(text: str) -> SimConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    return config_from_dict(data if data is not None else {})


def serialize_config(config: SimConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def default_config(**run) -> SimConfig:
    """The reference dyad: two agents, all defaults."""
    return config_from_dict({"agents": ["A", "B"], "run": run})
