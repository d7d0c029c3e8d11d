"""Synchronous tick loop over a group of turn-taking agents.

Every tick is double-buffered: all agents read the world at tick ``t`` and
the successor world is assembled only after every agent has decided. Random
draws come from a substream keyed by (master seed, agent id, tick), so the
order in which agents are processed cannot change the outcome.

Per tick and per agent the substream is consumed in a fixed order: eight
uniforms for cue emission, one for the speech drive, then (only when the
agent takes the floor) one geometric draw for the utterance length.
"""

from __future__ import annotations

import zlib
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from turnsync.config import SimConfig
from turnsync.dialogue import (
    AttitudeMatrix,
    AttitudeUpdateParams,
    ConversationalState,
    TransitionContext,
    apply_interruption_update,
    pick_addressee,
    speaker_aggregates,
    speech_drive,
    transition,
)
from turnsync.errors import ConfigError
from turnsync.perception import (
    BeliefState,
    CueVector,
    EmissionModel,
    belief_update,
    check_stochastic,
    emit_cues,
    infer_addressed,
    likelihood_table,
    map_state,
)

S = ConversationalState

TICK_SECONDS = 0.1  # nominal only; nothing in the dynamics depends on it

EVENT_KINDS = ("FloorTaken", "FloorReleased", "Interruption", "DegenerateObservation")

_STEP_STREAM = 0
_INIT_STREAM = 1


@dataclass
class AgentRuntime:
    id: str
    state: ConversationalState
    talkativeness: float
    utterance_remaining: int = 0
    addressee: str | None = None
    # Tick at which the current Speaking turn began; None when not speaking.
    turn_start: int | None = None
    beliefs: dict[str, BeliefState] = field(default_factory=dict)
    # MAP (or oracle) reading of every other agent from the previous tick.
    perceived: dict[str, ConversationalState] = field(default_factory=dict)


@dataclass
class WorldState:
    tick: int
    agents: tuple[AgentRuntime, ...]
    attitudes: AttitudeMatrix
    last_cues: dict[str, CueVector] = field(default_factory=dict)

    def agent(self, agent_id: str) -> AgentRuntime:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    @property
    def states(self) -> dict[str, ConversationalState]:
        return {a.id: a.state for a in self.agents}


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    participants: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "Interruption" and (len(self.participants) != 2 or self.participants[0] == self.participants[1]):
            raise ValueError("Interruption needs two distinct agents (interrupter, interrupted)")

    def sort_key(self):
        return (EVENT_KINDS.index(self.kind), self.participants)

    def to_dict(self) -> dict:
        return {"tick": self.tick, "kind": self.kind, "participants": list(self.participants)}

    @classmethod
    def from_dict(cls, d) -> "Event":
        return cls(int(d["tick"]), d["kind"], tuple(d["participants"]))


@dataclass
class TickRecord:
    tick: int
    states: dict[str, ConversationalState]
    cues: dict[str, CueVector]
    attitudes: AttitudeMatrix
    events: list[Event]

    @property
    def speaking(self) -> dict[str, bool]:
        return {i: s == S.Speaking for i, s in self.states.items()}


@dataclass
class Trace:
    config: dict
    seed: int
    records: list[TickRecord]

    @property
    def agent_ids(self) -> list[str]:
        return sorted(self.records[0].states) if self.records else []

    def events(self, kind: str | None = None) -> list[Event]:
        return [e for r in self.records for e in r.events if kind is None or e.kind == kind]


@dataclass(frozen=True, eq=False)
class Rules:
    """Per-run constants derived once from a config.

    Also caches one Philox bit generator per agent; ``rng`` rewinds it to the
    (agent, tick) substream, so a returned generator is only valid until the
    next ``rng`` call for the same agent. Not shared across threads.
    """

    seed: int
    mode: str
    model: EmissionModel
    likelihoods: np.ndarray
    hmm: np.ndarray
    params: AttitudeUpdateParams
    yield_threshold: float
    mean_utterance_ticks: float
    _generators: dict = field(default_factory=dict, repr=False)

    def rng(self, agent_id: str, tick: int) -> np.random.Generator:
        """Same stream as ``agent_rng(self.seed, agent_id, tick)``, without rebuilding it."""
        key = _philox_key(self.seed, agent_id)
        gen = self._generators.get(agent_id)
        if gen is None:
            gen = self._generators[agent_id] = np.random.Generator(np.random.Philox(key=key))
        gen.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([0, 0, _STEP_STREAM, tick], dtype=np.uint64), "key": key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return gen

    @classmethod
    def from_config(cls, config: SimConfig) -> "Rules":
        model = config.emission_model()
        return cls(
            seed=config.run.seed,
            mode=config.perception.mode,
            model=model,
            likelihoods=likelihood_table(model),
            hmm=check_stochastic(config.hmm_transition()),
            params=config.update_params(),
            yield_threshold=config.dynamics.yield_threshold,
            mean_utterance_ticks=config.dynamics.mean_utterance_ticks,
        )


@lru_cache(maxsize=4096)
def _philox_key(seed: int, agent_id: str) -> np.ndarray:
    entropy = [seed, zlib.crc32(agent_id.encode("utf-8"))]
    return np.random.SeedSequence(entropy).generate_state(2, np.uint64)


def agent_rng(seed: int, agent_id: str, tick: int, stream: int = _STEP_STREAM) -> np.random.Generator:
    """Counter-based substream for one agent at one tick.

    The key depends on (seed, agent); the tick and stream sit in the high
    counter words, far above the few blocks a tick consumes.
    """
    bits = np.random.Philox(key=_philox_key(seed, agent_id), counter=[0, 0, stream, tick])
    return np.random.Generator(bits)


def sample_utterance_length(rng: np.random.Generator, mean_ticks: float) -> int:
    """Geometric number of ticks (support 1, 2, ...) with the given mean."""
    if not mean_ticks >= 1:
        raise ConfigError(f"must be >= 1, got {mean_ticks}", "mean_utterance_ticks")
    return int(rng.geometric(1.0 / mean_ticks))


def initial_world(config: SimConfig) -> WorldState:
    ids = config.agent_ids
    if len(ids) < 2:
        raise ConfigError("at least 2 required", "agents")
    attitudes = config.attitude_matrix()
    specs = {a.id: a for a in config.agents}
    agents = []
    for i in ids:
        spec = specs[i]
        state = spec.initial_state
        likings = {j: a.liking for j, a in attitudes.toward_others(i).items()}
        remaining, addressee, start = 0, None, None
        if state in (S.Speaking, S.EndOfSpeech):
            addressee = pick_addressee(likings)
        if state == S.Speaking:
            rng = agent_rng(config.run.seed, i, 0, _INIT_STREAM)
            remaining = sample_utterance_length(rng, config.dynamics.mean_utterance_ticks)
            start = 0
        agents.append(AgentRuntime(
            id=i,
            state=state,
            talkativeness=spec.talkativeness,
            utterance_remaining=remaining,
            addressee=addressee,
            turn_start=start,
            beliefs={j: BeliefState.uniform() for j in ids if j != i},
            perceived={j: specs[j].initial_state for j in ids if j != i},
        ))
    return WorldState(0, tuple(agents), attitudes)


def emit_all(world: WorldState, rules: Rules) -> dict[str, CueVector]:
    return {
        a.id: emit_cues(a.state, a.addressee, rules.model, rules.rng(a.id, world.tick))
        for a in world.agents
    }


def step(
    world: WorldState,
    config: SimConfig | Rules,
    order: Sequence[str] | None = None,
) -> tuple[WorldState, list[Event]]:
    """Advance one tick. ``order`` permutes agent processing (it must not matter)."""
    rules = config if isinstance(config, Rules) else Rules.from_config(config)
    if len(world.agents) < 2:
        raise ConfigError("at least 2 required", "agents")
    t = world.tick
    by_id = {a.id: a for a in world.agents}
    ids = sorted(by_id)
    if order is None:
        order = ids
    elif sorted(order) != ids:
        raise ConfigError("processing order must be a permutation of the agent ids")

    rngs = {i: rules.rng(i, t) for i in order}
    cues = {i: emit_cues(by_id[i].state, by_id[i].addressee, rules.model, rngs[i]) for i in order}
    states_t = {i: by_id[i].state for i in ids}

    events: list[Event] = []
    successors: dict[str, AgentRuntime] = {}
    for i in order:
        a = by_id[i]
        rng = rngs[i]
        others = [j for j in ids if j != i]

        if rules.mode == "inferred":
            beliefs, perceived = {}, {}
            for j in others:
                b, degenerate = belief_update(a.beliefs[j], cues[j], rules.model, rules.hmm, _checked=True, _likelihoods=rules.likelihoods)
                if degenerate:
                    events.append(Event(t + 1, "DegenerateObservation", (i, j)))
                beliefs[j] = b
                perceived[j] = map_state(b)
        else:
            beliefs = a.beliefs
            perceived = {j: states_t[j] for j in others}

        toward = world.attitudes.toward_others(i)
        likings = {j: toward[j].liking for j in others}
        addressed = infer_addressed({j: cues[j] for j in others}, cues[i].attention_display, i)
        agg = speaker_aggregates(perceived, toward, i)
        drive_fired = bool(rng.random() < speech_drive(likings, a.talkativeness))
        newly_speaking = [j for j in others if perceived[j] == S.Speaking and a.perceived.get(j) != S.Speaking]
        ctx = TransitionContext(
            addressed=addressed,
            drive_fired=drive_fired,
            utterance_finished=a.state == S.Speaking and a.utterance_remaining <= 1,
            yield_floor=any(toward[j].dominance >= rules.yield_threshold for j in newly_speaking),
        )
        nxt = transition(a.state, agg, ctx)

        remaining, addressee, start = 0, None, None
        if nxt == S.Speaking:
            if a.state == S.Speaking:
                remaining, addressee, start = a.utterance_remaining - 1, a.addressee, a.turn_start
            else:
                remaining = sample_utterance_length(rng, rules.mean_utterance_ticks)
                addressee = pick_addressee(likings)
                start = t + 1
                events.append(Event(t + 1, "FloorTaken", (i,)))
        elif nxt == S.EndOfSpeech:
            addressee = a.addressee
            if a.state == S.Speaking:
                events.append(Event(t + 1, "FloorReleased", (i,)))
        successors[i] = replace(
            a, state=nxt, utterance_remaining=remaining, addressee=addressee,
            turn_start=start, beliefs=beliefs, perceived=perceived,
        )

    attitudes = world.attitudes
    for x in ids:
        if states_t[x] == S.Speaking and successors[x].state == S.InterruptionOfSpeech:
            y = _interrupter(x, by_id, states_t)
            if y is not None:
                events.append(Event(t + 1, "Interruption", (y, x)))
    events.sort(key=Event.sort_key)
    for e in events:
        if e.kind == "Interruption":
            attitudes = apply_interruption_update(attitudes, e.participants[0], e.participants[1], rules.params)

    new_world = WorldState(t + 1, tuple(successors[i] for i in ids), attitudes, {i: cues[i] for i in ids})
    return new_world, events


def _interrupter(x: str, by_id: dict[str, AgentRuntime], states_t: dict[str, ConversationalState]) -> str | None:
    """Who took the floor while ``x`` held it: latest starter, lowest id on ties."""
    x_start = by_id[x].turn_start
    candidates = [
        j for j, s in states_t.items()
        if j != x and s == S.Speaking and by_id[j].turn_start is not None
        and (x_start is None or by_id[j].turn_start > x_start)
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda j: (-by_id[j].turn_start, j))


def _record(world: WorldState, events: list[Event]) -> TickRecord:
    return TickRecord(world.tick, world.states, {}, world.attitudes, events)


StepObserver = Callable[[WorldState, WorldState, list[Event]], None]


def run(
    config: SimConfig,
    order: Sequence[str] | None = None,
    observer: StepObserver | None = None,
    world: WorldState | None = None,
) -> Trace:
    """Simulate ``config.run.ticks`` ticks and return the full trace.

    Record ``t`` holds the states and attitudes at tick ``t``, the cues
    emitted from those states, and the events produced by the step into
    ``t``. ``world`` replaces the config-derived starting point (scripted
    scenarios).
    """
    rules = Rules.from_config(config)
    world = initial_world(config) if world is None else world
    records = [_record(world, [])]
    for _ in range(config.run.ticks):
        new, events = step(world, rules, order)
        if observer is not None:
            observer(world, new, events)
        records[-1].cues = new.last_cues
        records.append(_record(new, events))
        world = new
    records[-1].cues = emit_all(world, rules)
    return Trace(config.to_dict(), config.run.seed, records)


def iter_worlds(config: SimConfig, world: WorldState | None = None) -> Iterable[tuple[WorldState, list[Event]]]:
    """Yield (world, events) after every step, without building a trace."""
    rules = Rules.from_config(config)
    world = initial_world(config) if world is None else world
    for _ in range(config.run.ticks):
        world, events = step(world, rules)
        yield world, events
