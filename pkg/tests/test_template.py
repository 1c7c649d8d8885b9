"""Emotion templates: tempo bands, octave shifts, volume, ablation streams."""

from __future__ import annotations

import random

import pytest

from emomelody.errors import ExhaustedRetriesError
from emomelody.generator import CharLanguageModel
from emomelody.labeling import ControlCode
from emomelody.notation import parse_abc
from emomelody.template import (
    TEMPLATE_FEATURES,
    TEMPLATES,
    apply_template,
    conditioning_label,
    generate_with_emotion,
)

SCORE = parse_abc("X:1\nL:1/8\nM:4/4\nK:C\nC2E2 G2c2|c8|]\n")


class TestTemplateTable:
    def test_quadrant_rows(self):
        assert TEMPLATES["Q1"].tempo_range == (160, 184)
        assert TEMPLATES["Q2"].tempo_range == (184, 228)
        assert TEMPLATES["Q3"].tempo_range == (40, 69)
        assert TEMPLATES["Q4"].tempo_range == (40, 69)
        assert TEMPLATES["Q1"].octave_shift == 0
        assert TEMPLATES["Q2"].octave_shift == -2
        assert TEMPLATES["Q3"].octave_shift == -1
        assert TEMPLATES["Q4"].octave_shift == 0
        assert [TEMPLATES[q].volume_db for q in ("Q1", "Q2", "Q3", "Q4")] == [
            5.0, 10.0, 0.0, 0.0,
        ]

    def test_velocities(self):
        # 64 * 10^(dB/20), rounded, clamped to the MIDI byte range
        assert TEMPLATES["Q1"].velocity == 114
        assert TEMPLATES["Q2"].velocity == 127  # raw 202 clamps
        assert TEMPLATES["Q3"].velocity == 64
        assert TEMPLATES["Q4"].velocity == 64

    def test_velocity_ratio_tracks_decibels(self):
        ratio = TEMPLATES["Q1"].velocity / TEMPLATES["Q4"].velocity
        assert ratio == pytest.approx(10 ** (5.0 / 20.0), abs=0.01)

    def test_tempo_range_inclusive_coverage(self):
        rng = random.Random(0)
        picks = {TEMPLATES["Q3"].pick_tempo(rng) for _ in range(3000)}
        assert min(picks) == 40
        assert max(picks) == 69
        assert picks == set(range(40, 70))


class TestConditioningLabel:
    def test_identity_with_all_features(self):
        for label in TEMPLATES:
            assert conditioning_label(label, seed=1) == label

    def test_masked_bits_are_deterministic_coins(self):
        one = conditioning_label("Q1", seed=5, features=("tempo",))
        assert conditioning_label("Q1", seed=5, features=("tempo",)) == one
        seen = {
            conditioning_label("Q1", seed=s, features=("tempo",)) for s in range(64)
        }
        assert seen == {"Q1", "Q2", "Q3", "Q4"}

    def test_single_masked_bit_moves_one_axis(self):
        seen = {
            conditioning_label("Q1", seed=s, features=("pitch_sd", "tempo"))
            for s in range(64)
        }
        assert seen == {"Q1", "Q2"}  # arousal pinned high, valence random
        seen = {
            conditioning_label("Q1", seed=s, features=("mode", "tempo"))
            for s in range(64)
        }
        assert seen == {"Q1", "Q4"}  # valence pinned high, arousal random

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            conditioning_label("Q7", seed=0)


class TestApplyTemplate:
    def test_q2_full_treatment(self):
        performance, applied = apply_template(SCORE, "Q2", seed=3)
        assert 184 <= applied["tempo"] <= 228
        assert performance.score.tempo_bpm == float(applied["tempo"])
        assert applied["octave"] == -2
        assert "octave_requested" not in applied
        assert applied["velocity"] == 127
        assert performance.velocity == 127
        base = SCORE.sounded_pitches()
        assert performance.score.sounded_pitches() == [p - 24 for p in base]

    def test_octave_fallback_recorded(self):
        low = parse_abc("X:1\nL:1/8\nM:4/4\nK:C\nC,,,,4 D,,,,4|C,,,,8|]\n")
        performance, applied = apply_template(low, "Q2", seed=3)
        assert applied["octave"] == -1
        assert applied["octave_requested"] == -2
        assert min(performance.score.sounded_pitches()) >= 0

    def test_disabled_features_keep_defaults(self):
        performance, applied = apply_template(SCORE, "Q2", seed=3, features=())
        assert performance.score == SCORE
        assert performance.velocity == 64
        assert applied == {"velocity": 64}

    def test_ablating_volume_changes_nothing_else(self):
        full, applied_full = apply_template(SCORE, "Q2", seed=11)
        cut, applied_cut = apply_template(
            SCORE, "Q2", seed=11, features=("mode", "pitch_sd", "tempo", "octave")
        )
        assert applied_cut["tempo"] == applied_full["tempo"]
        assert applied_cut["octave"] == applied_full["octave"]
        assert cut.score == full.score
        assert cut.velocity == 64 and full.velocity == 127

    def test_ablating_tempo_keeps_source_tempo(self):
        timed = parse_abc("X:1\nL:1/8\nM:4/4\nQ:96\nK:C\nC8|C8|]\n")
        performance, applied = apply_template(
            timed, "Q1", seed=2, features=("octave", "volume")
        )
        assert performance.score.tempo_bpm == 96.0
        assert "tempo" not in applied

    def test_feature_streams_are_independent(self):
        # same seed: the tempo draw must not shift when volume is ablated
        tempos = set()
        for features in (TEMPLATE_FEATURES, ("tempo",), ("tempo", "octave")):
            _, applied = apply_template(SCORE, "Q1", seed=7, features=features)
            tempos.add(applied["tempo"])
        assert len(tempos) == 1


class TestGenerateWithEmotion:
    def test_piece_structure(self, trained_model):
        piece = generate_with_emotion(trained_model, "Q2", seed=4)
        assert piece.label == "Q2"
        assert piece.attempts >= 1
        parsed = parse_abc(piece.abc_text)
        assert 184 <= piece.applied["tempo"] <= 228
        assert piece.applied["conditioning"].startswith("Q2 ")
        assert piece.performance.velocity == 127
        assert piece.performance.score.tempo_bpm == float(piece.applied["tempo"])
        # abc_text is the raw tune; the performed score adds the treatment
        assert piece.score.sounded_pitches() != parsed.sounded_pitches()

    def test_deterministic(self, trained_model):
        a = generate_with_emotion(trained_model, "Q3", seed=9)
        b = generate_with_emotion(trained_model, "Q3", seed=9)
        assert a == b
        c = generate_with_emotion(trained_model, "Q3", seed=10)
        assert c.abc_text != a.abc_text or c.applied != a.applied

    def test_explicit_control_code(self, trained_model, balanced_records):
        control = balanced_records[2][0]
        piece = generate_with_emotion(trained_model, "Q1", seed=1, control=control)
        assert f"B:{control.bars}" in piece.applied["conditioning"]

    def test_retries_exhaust_on_hopeless_model(self, trained_model):
        uniform = CharLanguageModel.uniform(trained_model.vocab, order=6, alpha=0.01)
        with pytest.raises(ExhaustedRetriesError, match="attempts"):
            generate_with_emotion(
                uniform, "Q1", seed=0, max_retries=2, guarded=False, max_chars=80
            )

    def test_ablation_leaves_other_features_bit_identical(self, trained_model):
        full = generate_with_emotion(trained_model, "Q2", seed=6)
        cut = generate_with_emotion(
            trained_model, "Q2", seed=6,
            features=("mode", "pitch_sd", "tempo", "octave"),
        )
        assert cut.abc_text == full.abc_text
        assert cut.applied["tempo"] == full.applied["tempo"]
        assert cut.applied["octave"] == full.applied["octave"]
        assert cut.performance.velocity == 64
        assert full.performance.velocity == 127
