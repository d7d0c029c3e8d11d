import itertools

import pytest
from hypothesis import given, strategies as st

from turnsync.dialogue import (
    Attitude,
    AttitudeMatrix,
    AttitudeUpdateParams,
    ConversationalState as S,
    INITIAL_STATE,
    SpeakerAggregates,
    TransitionContext,
    apply_interruption_update,
    pick_addressee,
    speaker_aggregates,
    speech_drive,
    transition,
)
from turnsync.errors import ConfigError

unit = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


def wants_floor_rule(mean_dom, mean_lik, count):
    """Three-branch rule for WantToSpeak, written out independently."""
    if mean_dom + abs(mean_lik) >= 0:
        return S.Speaking
    if count == 0:
        return S.Speaking
    return S.WantToSpeak


def test_initial_state_is_unaddressed():
    assert INITIAL_STATE is S.Unaddressed


def test_state_order_is_fixed():
    assert [s.name for s in S] == [
        "Unaddressed", "Addressed", "WantToSpeak", "Speaking", "InterruptionOfSpeech", "EndOfSpeech",
    ]


class TestSpeakerAggregates:
    def test_two_speakers(self):
        perceived = {"B": S.Speaking, "C": S.Speaking}
        att = {"B": Attitude(0.6, -0.4), "C": Attitude(0.4, 0.2)}
        agg = speaker_aggregates(perceived, att, "A")
        assert agg.count_speaking == 2
        assert agg.mean_dominance == pytest.approx(-0.1, abs=1e-12)
        assert agg.mean_liking == pytest.approx(0.5, abs=1e-12)

    def test_nobody_speaking(self):
        agg = speaker_aggregates({"B": S.Unaddressed}, {"B": Attitude(0.9, 0.9)}, "A")
        assert agg == SpeakerAggregates(0.0, 0.0, 0)

    def test_addressed_agent_excluded(self):
        agg = speaker_aggregates({"B": S.Addressed}, {"B": Attitude(0.3, -0.7)}, "A")
        assert agg == SpeakerAggregates(0.0, 0.0, 0)

    def test_mismatched_keys(self):
        with pytest.raises(ConfigError):
            speaker_aggregates({"B": S.Speaking}, {"C": Attitude()}, "A")

    def test_self_in_keys(self):
        with pytest.raises(ConfigError):
            speaker_aggregates({"A": S.Speaking}, {"A": Attitude()}, "A")

    @given(
        st.lists(st.tuples(st.sampled_from(list(S)), unit, unit), min_size=1, max_size=6),
        st.integers(0, 5), unit, unit,
    )
    def test_non_speakers_never_influence_means(self, rows, which, lik, dom):
        ids = [f"x{n}" for n in range(len(rows))]
        perceived = {i: r[0] for i, r in zip(ids, rows)}
        att = {i: Attitude(r[1], r[2]) for i, r in zip(ids, rows)}
        base = speaker_aggregates(perceived, att, "self")
        target = ids[which % len(ids)]
        if perceived[target] == S.Speaking:
            return
        att[target] = Attitude(lik, dom)
        assert speaker_aggregates(perceived, att, "self") == base
        if base.count_speaking:
            assert -1 <= base.mean_dominance <= 1 and -1 <= base.mean_liking <= 1


class TestTransition:
    def test_want_to_speak_empty_floor(self):
        assert transition(S.WantToSpeak, SpeakerAggregates(-1.0, 0.0, 0)) == S.Speaking

    def test_want_to_speak_inequality_passes(self):
        # -0.3 + |0.5| = 0.2 >= 0
        assert transition(S.WantToSpeak, SpeakerAggregates(-0.3, 0.5, 2)) == S.Speaking

    def test_want_to_speak_inequality_fails(self):
        # -0.6 + |0.2| = -0.4 < 0
        assert transition(S.WantToSpeak, SpeakerAggregates(-0.6, 0.2, 1)) == S.WantToSpeak

    def test_absolute_liking_emboldens(self):
        assert transition(S.WantToSpeak, SpeakerAggregates(-0.5, -0.6, 1)) == S.Speaking

    def test_grid_matches_rule(self):
        grid = [round(-1 + 0.1 * n, 10) for n in range(21)]
        for d, l, c in itertools.product(grid, grid, range(4)):
            got = transition(S.WantToSpeak, SpeakerAggregates(d, l, c))
            assert got == wants_floor_rule(d, l, c), (d, l, c)

    def test_speaking_ends(self):
        ctx = TransitionContext(utterance_finished=True)
        assert transition(S.Speaking, SpeakerAggregates(), ctx) == S.EndOfSpeech

    def test_speaking_yields(self):
        assert transition(S.Speaking, SpeakerAggregates(), TransitionContext(yield_floor=True)) == S.InterruptionOfSpeech

    def test_natural_end_beats_yield(self):
        ctx = TransitionContext(utterance_finished=True, yield_floor=True)
        assert transition(S.Speaking, SpeakerAggregates(), ctx) == S.EndOfSpeech

    def test_speaking_holds(self):
        assert transition(S.Speaking, SpeakerAggregates(0.5, 0.5, 1)) == S.Speaking

    @pytest.mark.parametrize("ctx,expected", [
        (TransitionContext(addressed=True), S.Addressed),
        (TransitionContext(addressed=True, drive_fired=True), S.Addressed),
        (TransitionContext(drive_fired=True), S.WantToSpeak),
        (TransitionContext(), S.Unaddressed),
    ])
    def test_unaddressed_row(self, ctx, expected):
        assert transition(S.Unaddressed, SpeakerAggregates(), ctx) == expected

    @pytest.mark.parametrize("ctx,expected", [
        (TransitionContext(addressed=True, drive_fired=True), S.WantToSpeak),
        (TransitionContext(addressed=False), S.Unaddressed),
        (TransitionContext(addressed=True), S.Addressed),
    ])
    def test_addressed_row(self, ctx, expected):
        assert transition(S.Addressed, SpeakerAggregates(), ctx) == expected

    @pytest.mark.parametrize("state", [S.InterruptionOfSpeech, S.EndOfSpeech])
    def test_one_tick_states(self, state):
        ctx = TransitionContext(addressed=True, drive_fired=True, yield_floor=True)
        assert transition(state, SpeakerAggregates(0.3, 0.3, 2), ctx) == S.Unaddressed

    @given(st.sampled_from(list(S)), unit, unit, st.integers(0, 4), st.booleans(), st.booleans(), st.booleans(), st.booleans())
    def test_pure(self, state, d, l, c, a, b, e, y):
        agg, ctx = SpeakerAggregates(d, l, c), TransitionContext(a, b, e, y)
        assert transition(state, agg, ctx) == transition(state, agg, ctx)


class TestInterruptionUpdate:
    def matrix(self, **kw):
        return AttitudeMatrix.uniform(["A", "B", "C"], **kw)

    def test_direction(self):
        m = apply_interruption_update(self.matrix(), "A", "B", AttitudeUpdateParams(0.1, 0.1))
        assert m[("A", "B")].dominance == pytest.approx(0.1)
        assert m[("B", "A")].liking == pytest.approx(-0.1)
        assert m[("A", "B")].liking == 0.0 and m[("B", "A")].dominance == 0.0

    def test_clamp_upper(self):
        m = self.matrix().replace({("A", "B"): Attitude(0.0, 0.95)})
        m = apply_interruption_update(m, "A", "B")
        assert m[("A", "B")].dominance == 1.0

    def test_clamp_lower(self):
        m = self.matrix().replace({("B", "A"): Attitude(-0.95, 0.0)})
        assert apply_interruption_update(m, "A", "B")[("B", "A")].liking == -1.0

    def test_third_agent_untouched(self):
        before = self.matrix(liking=0.2, dominance=-0.3)
        after = apply_interruption_update(before, "A", "B")
        for pair in [("A", "C"), ("C", "A"), ("B", "C"), ("C", "B")]:
            assert after[pair] == before[pair]

    def test_input_not_mutated(self):
        before = self.matrix()
        apply_interruption_update(before, "A", "B")
        assert before == self.matrix()

    def test_unknown_agent(self):
        with pytest.raises(ConfigError):
            apply_interruption_update(self.matrix(), "A", "Z")

    def test_self_interruption(self):
        with pytest.raises(ConfigError):
            apply_interruption_update(self.matrix(), "A", "A")

    def test_params_must_be_positive(self):
        with pytest.raises(ConfigError):
            AttitudeUpdateParams(0.0, 0.1)
        with pytest.raises(ConfigError):
            AttitudeUpdateParams(0.1, -0.1)

    @given(
        st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from("ABC")), max_size=60),
        st.floats(0.01, 0.7), st.floats(0.01, 0.7),
    )
    def test_clamp_safety_and_locality(self, pairs, dd, dl):
        m = self.matrix()
        params = AttitudeUpdateParams(dd, dl)
        for i, j in pairs:
            if i == j:
                continue
            new = apply_interruption_update(m, i, j, params)
            changed = [
                (p, f) for p, a in m.items() for f in ("liking", "dominance")
                if getattr(new[p], f) != getattr(a, f)
            ]
            assert set(changed) <= {((i, j), "dominance"), ((j, i), "liking")}
            m = new
        for _, a in m.items():
            assert -1.0 <= a.liking <= 1.0 and -1.0 <= a.dominance <= 1.0


class TestAttitudeMatrix:
    def test_rejects_self_entry(self):
        with pytest.raises(ConfigError):
            AttitudeMatrix({("A", "A"): Attitude()})

    def test_requires_complete(self):
        with pytest.raises(ConfigError):
            AttitudeMatrix({("A", "B"): Attitude()})

    def test_asymmetry_allowed(self):
        m = AttitudeMatrix({("A", "B"): Attitude(0.5, 0.1), ("B", "A"): Attitude(-0.2, 0.9)})
        assert m[("A", "B")] != m[("B", "A")]

    def test_out_of_range_attitude(self):
        with pytest.raises(ConfigError):
            Attitude(1.5, 0.0)

    def test_dict_round_trip(self):
        m = AttitudeMatrix.uniform("ABC", 0.25, -0.5)
        assert AttitudeMatrix.from_dict(m.to_dict()) == m


class TestSpeechDrive:
    def test_max_liking(self):
        assert speech_drive({"B": 1.0, "C": -0.5}, 0.1) == pytest.approx(0.1)

    def test_total_dislike(self):
        assert speech_drive({"B": -1.0, "C": -1.0}, 0.1) == 0.0

    def test_neutral(self):
        assert speech_drive({"B": 0.0}, 0.1) == pytest.approx(0.05)

    def test_empty(self):
        with pytest.raises(ConfigError):
            speech_drive({}, 0.1)

    @given(st.dictionaries(st.sampled_from("BCDE"), unit, min_size=1), st.sampled_from("BCDE"), unit, st.floats(0, 1))
    def test_monotone_and_bounded(self, likings, who, new, talk):
        p = speech_drive(likings, talk)
        assert 0.0 <= p <= 1.0
        if who in likings and new >= likings[who]:
            assert speech_drive({**likings, who: new}, talk) >= p


def test_addressee_lowest_id_on_tie():
    assert pick_addressee({"C": 0.5, "B": 0.5, "D": 0.1}) == "B"
    assert pick_addressee({"C": 0.6, "B": 0.5}) == "C"
