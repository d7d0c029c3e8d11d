"""Nonverbal cue generation and per-observer hidden-state filtering.

Agents never see each other's conversational state. Each tick every agent
emits a bundle of boolean cues (speaking, gazing at its addressee, displaying
attention, backchanneling), and every observer runs one forward-filter step
per observed agent to keep a belief over that agent's six states.

The four channels are modelled as conditionally independent given the state.
Gaze can only be present when the emitter has an addressee, which in the
turn-taking machine means ``Speaking`` or ``EndOfSpeech``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from turnsync.dialogue import N_STATES, ConversationalState
from turnsync.errors import ConfigError

S = ConversationalState

CHANNELS = ("speaking", "gaze", "attention", "backchannel")

# States in which the emitter has an addressee to gaze at.
ADDRESSEE_STATES = frozenset({S.Speaking, S.EndOfSpeech})

_LOW = 0.05
DEFAULT_EMISSIONS: dict[ConversationalState, dict[str, float]] = {
    S.Unaddressed: dict(speaking=_LOW, gaze=_LOW, attention=_LOW, backchannel=_LOW),
    S.Addressed: dict(speaking=_LOW, gaze=_LOW, attention=0.9, backchannel=0.5),
    S.WantToSpeak: dict(speaking=0.05, gaze=_LOW, attention=0.9, backchannel=0.3),
    S.Speaking: dict(speaking=0.98, gaze=0.9, attention=0.8, backchannel=_LOW),
    S.InterruptionOfSpeech: dict(speaking=0.5, gaze=_LOW, attention=0.9, backchannel=_LOW),
    S.EndOfSpeech: dict(speaking=0.1, gaze=0.7, attention=_LOW, backchannel=_LOW),
}
DEFAULT_NOISE_FLIP = 0.02


@dataclass(frozen=True)
class CueVector:
    speaking: bool = False
    gaze_target: str | None = None
    attention_display: bool = False
    backchannel: bool = False

    def to_dict(self) -> dict:
        return {
            "speaking": self.speaking,
            "gaze_target": self.gaze_target,
            "attention_display": self.attention_display,
            "backchannel": self.backchannel,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CueVector":
        return cls(bool(d["speaking"]), d["gaze_target"], bool(d["attention_display"]), bool(d["backchannel"]))


@dataclass(frozen=True)
class EmissionModel:
    """Per-state cue probabilities plus an independent per-channel flip rate.

    ``probs`` has shape (6, 4): rows follow ``ConversationalState`` order,
    columns follow ``CHANNELS``.
    """

    probs: np.ndarray = field(default_factory=lambda: _table(DEFAULT_EMISSIONS))
    noise_flip: float = DEFAULT_NOISE_FLIP

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (N_STATES, len(CHANNELS)):
            raise ConfigError(f"emission table must be {N_STATES}x{len(CHANNELS)}, got {p.shape}")
        if not np.all((p >= 0) & (p <= 1)):
            raise ConfigError("emission probabilities must lie in [0, 1]")
        if not 0.0 <= self.noise_flip <= 1.0:
            raise ConfigError("must lie in [0, 1]", "noise_flip")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def default(cls, noise_flip: float = DEFAULT_NOISE_FLIP) -> "EmissionModel":
        return cls(_table(DEFAULT_EMISSIONS), noise_flip)

    @classmethod
    def ideal(cls, noise_flip: float = 0.0) -> "EmissionModel":
        """Deterministic signatures: every default probability rounded to 0 or 1."""
        return cls((_table(DEFAULT_EMISSIONS) >= 0.5).astype(float), noise_flip)

    def with_overrides(self, overrides: Mapping[ConversationalState, Mapping[str, float]]) -> "EmissionModel":
        p = self.probs.copy()
        for state, chans in overrides.items():
            for ch, v in chans.items():
                p[int(state), CHANNELS.index(ch)] = v
        return EmissionModel(p, self.noise_flip)

    def __eq__(self, other):
        if not isinstance(other, EmissionModel):
            return NotImplemented
        return self.noise_flip == other.noise_flip and np.array_equal(self.probs, other.probs)

    __hash__ = None

    def channel_likelihoods(self) -> np.ndarray:
        """P(channel observed true | state) after noise, shape (6, 4)."""
        f = self.noise_flip
        q = self.probs * (1.0 - f) + (1.0 - self.probs) * f
        has_addressee = np.array([s in ADDRESSEE_STATES for s in S], dtype=float)
        q = q.copy()
        q[:, 1] *= has_addressee
        return q


def _table(by_state: Mapping[ConversationalState, Mapping[str, float]]) -> np.ndarray:
    return np.array([[by_state[s][c] for c in CHANNELS] for s in S], dtype=float)


@dataclass(frozen=True, eq=False)
class BeliefState:
    distribution: np.ndarray

    @classmethod
    def uniform(cls) -> "BeliefState":
        return cls(np.full(N_STATES, 1.0 / N_STATES))

    @classmethod
    def point(cls, state: ConversationalState) -> "BeliefState":
        d = np.zeros(N_STATES)
        d[int(state)] = 1.0
        return cls(d)


def sticky_transition_matrix(stay: float = 0.8) -> np.ndarray:
    """Observer's generic prior: stay with ``stay``, otherwise jump uniformly."""
    if not 0.0 <= stay <= 1.0:
        raise ConfigError("must lie in [0, 1]", "hmm_stay_probability")
    m = np.full((N_STATES, N_STATES), (1.0 - stay) / (N_STATES - 1))
    np.fill_diagonal(m, stay)
    return m


def check_stochastic(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (N_STATES, N_STATES):
        raise ConfigError(f"HMM transition matrix must be {N_STATES}x{N_STATES}")
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
        raise ConfigError("HMM transition matrix rows must be non-negative and sum to 1")
    return m


def emit_cues(
    true_state: ConversationalState,
    addressee: str | None,
    model: EmissionModel,
    rng: np.random.Generator,
) -> CueVector:
    # Always eight draws, so the stream position does not depend on the outcome.
    base = rng.random(4) < model.probs[int(true_state)]
    flips = rng.random(4) < model.noise_flip
    on = base ^ flips
    return CueVector(
        speaking=bool(on[0]),
        gaze_target=addressee if (addressee is not None and on[1]) else None,
        attention_display=bool(on[2]),
        backchannel=bool(on[3]),
    )


def observation_likelihood(observed: CueVector, model: EmissionModel) -> np.ndarray:
    """P(observed | state) for all six states."""
    q = model.channel_likelihoods()
    seen = np.array([
        observed.speaking,
        observed.gaze_target is not None,
        observed.attention_display,
        observed.backchannel,
    ])
    return np.where(seen, q, 1.0 - q).prod(axis=1)


def cue_pattern(observed: CueVector) -> int:
    """Index 0..15 of the four observed channel values."""
    return (
        int(observed.speaking)
        | int(observed.gaze_target is not None) << 1
        | int(observed.attention_display) << 2
        | int(observed.backchannel) << 3
    )


def likelihood_table(model: EmissionModel) -> np.ndarray:
    """Row ``cue_pattern(c)`` holds P(c | state) for all states, shape (16, 6)."""
    q = model.channel_likelihoods()
    rows = []
    for pattern in range(16):
        seen = np.array([(pattern >> bit) & 1 for bit in range(4)], dtype=bool)
        rows.append(np.where(seen, q, 1.0 - q).prod(axis=1))
    return np.array(rows)


def belief_update(
    prior: BeliefState,
    observed: CueVector,
    model: EmissionModel,
    hmm_transition: np.ndarray,
    *,
    _checked: bool = False,
    _likelihoods: np.ndarray | None = None,
) -> tuple[BeliefState, bool]:
    """One forward-filter step.

    Returns the posterior and a flag that is True when the observation had
    zero likelihood under every state (the posterior is then reset to uniform).
    """
    m = hmm_transition if _checked else check_stochastic(hmm_transition)
    predicted = prior.distribution @ m
    if _likelihoods is not None:
        likelihood = _likelihoods[cue_pattern(observed)]
    else:
        likelihood = observation_likelihood(observed, model)
    weighted = predicted * likelihood
    total = weighted.sum()
    if total <= 0.0:
        return BeliefState.uniform(), True
    return BeliefState(weighted / total), False


def map_state(belief: BeliefState) -> ConversationalState:
    # argmax returns the first maximum, which is the fixed state order.
    return ConversationalState(int(belief.distribution.argmax()))


def infer_addressed(cues_from_others: Mapping[str, CueVector], own_attention: bool, self_id: str) -> bool:
    """Someone is speaking while looking at us, and we are visibly attending."""
    if self_id in cues_from_others:
        raise ConfigError(f"agent {self_id!r} cannot observe its own cues")
    if not own_attention:
        return False
    return any(c.speaking and c.gaze_target == self_id for c in cues_from_others.values())
