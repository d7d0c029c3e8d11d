"""Conversational state machine and interpersonal attitude model.

Each agent runs the same six-state turn-taking machine. Transitions out of
``WantToSpeak`` are driven by how the agent feels about whoever currently
holds the floor: the mean dominance and mean liking it holds toward the
agents it perceives as speaking, plus how many of them there are.

Attitudes are private and directed. Agent ``i``'s attitude toward ``j`` is a
(liking, dominance) pair in [-1, 1]; it says nothing about ``j``'s attitude
toward ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping

from turnsync.errors import ConfigError


class ConversationalState(IntEnum):
    """The six conversational states. Integer order doubles as tie-break order."""

    Unaddressed = 0
    Addressed = 1
    WantToSpeak = 2
    Speaking = 3
    InterruptionOfSpeech = 4
    EndOfSpeech = 5

    @classmethod
    def parse(cls, name: str) -> "ConversationalState":
        try:
            return cls[name]
        except KeyError:
            raise ConfigError(f"unknown conversational state {name!r}") from None


INITIAL_STATE = ConversationalState.Unaddressed
N_STATES = len(ConversationalState)


def _clamp(x: float) -> float:
    return -1.0 if x < -1.0 else 1.0 if x > 1.0 else x


@dataclass(frozen=True)
class Attitude:
    liking: float = 0.0
    dominance: float = 0.0

    def __post_init__(self):
        for name in ("liking", "dominance"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ConfigError(f"must be within [-1, 1], got {v}", name)

    def clamped(self, liking: float, dominance: float) -> "Attitude":
        return Attitude(_clamp(liking), _clamp(dominance))


class AttitudeMatrix:
    """Complete directed attitude table over a fixed set of agents.

    Instances are treated as immutable values: updates return a new matrix.
    """

    __slots__ = ("_agents", "_entries")

    def __init__(self, entries: Mapping[tuple[str, str], Attitude]):
        agents = sorted({i for i, _ in entries} | {j for _, j in entries})
        for i, j in entries:
            if i == j:
                raise ConfigError(f"self-attitude entry for {i!r}")
        missing = [(i, j) for i in agents for j in agents if i != j and (i, j) not in entries]
        if missing:
            raise ConfigError(f"missing attitude entries {missing}")
        self._agents = tuple(agents)
        self._entries = {(i, j): entries[(i, j)] for i in agents for j in agents if i != j}

    @classmethod
    def uniform(cls, agents: Iterable[str], liking: float = 0.0, dominance: float = 0.0) -> "AttitudeMatrix":
        agents = list(agents)
        a = Attitude(liking, dominance)
        return cls({(i, j): a for i in agents for j in agents if i != j})

    @property
    def agents(self) -> tuple[str, ...]:
        return self._agents

    def __getitem__(self, pair: tuple[str, str]) -> Attitude:
        try:
            return self._entries[pair]
        except KeyError:
            raise ConfigError(f"no attitude entry for pair {pair}") from None

    def __contains__(self, pair) -> bool:
        return pair in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttitudeMatrix):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"AttitudeMatrix({self._entries!r})"

    def items(self):
        return self._entries.items()

    def toward_others(self, agent: str) -> dict[str, Attitude]:
        """``agent``'s attitudes toward every other agent."""
        return {j: self._entries[(agent, j)] for j in self._agents if j != agent}

    def replace(self, updates: Mapping[tuple[str, str], Attitude]) -> "AttitudeMatrix":
        new = dict(self._entries)
        for pair in updates:
            if pair not in new:
                raise ConfigError(f"no attitude entry for pair {pair}")
        new.update(updates)
        return AttitudeMatrix(new)

    def to_dict(self) -> dict[str, dict[str, list[float]]]:
        """Nested ``{source: {target: [liking, dominance]}}``."""
        out: dict[str, dict[str, list[float]]] = {}
        for (i, j), a in self._entries.items():
            out.setdefault(i, {})[j] = [a.liking, a.dominance]
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, list[float]]]) -> "AttitudeMatrix":
        return cls({
            (i, j): Attitude(float(v[0]), float(v[1]))
            for i, row in data.items() for j, v in row.items()
        })


@dataclass(frozen=True)
class SpeakerAggregates:
    mean_dominance: float = 0.0
    mean_liking: float = 0.0
    count_speaking: int = 0


@dataclass(frozen=True)
class AttitudeUpdateParams:
    delta_dominance: float = 0.1
    delta_liking: float = 0.1

    def __post_init__(self):
        if not self.delta_dominance > 0:
            raise ConfigError("must be > 0", "delta_dominance")
        if not self.delta_liking > 0:
            raise ConfigError("must be > 0", "delta_liking")


@dataclass(frozen=True)
class TransitionContext:
    """Auxiliary predicates the transition table consults besides the aggregates."""

    addressed: bool = False
    drive_fired: bool = False
    utterance_finished: bool = False
    yield_floor: bool = False


def speaker_aggregates(
    perceived_states: Mapping[str, ConversationalState],
    attitudes_of_self: Mapping[str, Attitude],
    self_id: str,
) -> SpeakerAggregates:
    """Mean dominance / liking toward the agents perceived as speaking."""
    if set(perceived_states) != set(attitudes_of_self):
        raise ConfigError("perceived states and attitudes cover different agents")
    if self_id in perceived_states:
        raise ConfigError(f"agent {self_id!r} cannot perceive itself")
    speakers = [j for j, s in perceived_states.items() if s == ConversationalState.Speaking]
    if not speakers:
        return SpeakerAggregates()
    n = len(speakers)
    dom = sum(attitudes_of_self[j].dominance for j in speakers) / n
    lik = sum(attitudes_of_self[j].liking for j in speakers) / n
    return SpeakerAggregates(dom, lik, n)


def transition(
    current: ConversationalState,
    agg: SpeakerAggregates,
    ctx: TransitionContext = TransitionContext(),
) -> ConversationalState:
    S = ConversationalState
    if current == S.WantToSpeak:
        # Count first: the means are undefined with nobody speaking.
        if agg.count_speaking == 0:
            return S.Speaking
        if agg.mean_dominance + abs(agg.mean_liking) >= 0:
            return S.Speaking
        return S.WantToSpeak
    if current == S.Unaddressed:
        if ctx.addressed:
            return S.Addressed
        if ctx.drive_fired:
            return S.WantToSpeak
        return S.Unaddressed
    if current == S.Addressed:
        if ctx.drive_fired:
            return S.WantToSpeak
        if not ctx.addressed:
            return S.Unaddressed
        return S.Addressed
    if current == S.Speaking:
        if ctx.utterance_finished:
            return S.EndOfSpeech
        if ctx.yield_floor:
            return S.InterruptionOfSpeech
        return S.Speaking
    # InterruptionOfSpeech and EndOfSpeech both last one tick.
    return S.Unaddressed


def apply_interruption_update(
    matrix: AttitudeMatrix,
    interrupter: str,
    interrupted: str,
    params: AttitudeUpdateParams = AttitudeUpdateParams(),
) -> AttitudeMatrix:
    """Interrupter gains dominance over the interrupted; the interrupted likes the interrupter less."""
    if interrupter == interrupted:
        raise ConfigError("an agent cannot interrupt itself")
    for a in (interrupter, interrupted):
        if a not in matrix.agents:
            raise ConfigError(f"unknown agent id {a!r}")
    fwd = matrix[(interrupter, interrupted)]
    back = matrix[(interrupted, interrupter)]
    return matrix.replace({
        (interrupter, interrupted): fwd.clamped(fwd.liking, fwd.dominance + params.delta_dominance),
        (interrupted, interrupter): back.clamped(back.liking - params.delta_liking, back.dominance),
    })


def speech_drive(likings_of_self: Mapping[str, float], talkativeness: float) -> float:
    """Per-tick probability of wanting the floor.

    Scales talkativeness by the best liking the agent holds toward anyone,
    mapped from [-1, 1] onto [0, 1].
    """
    if not likings_of_self:
        raise ConfigError("speech drive needs at least one other agent")
    best = max(likings_of_self.values())
    return talkativeness * (1.0 + best) / 2.0


def pick_addressee(likings_of_self: Mapping[str, float]) -> str:
    """Most liked other agent; lowest id on ties."""
    return min(likings_of_self, key=lambda j: (-likings_of_self[j], j))
