"""Musical feature extraction for emotion analysis.

Pitch statistics are duration weighted: a whole note influences the average
and spread four times as much as a quarter note.  Durations stay exact
fractions until the final division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .midi import DEFAULT_VELOCITY, PerformanceScore, rms, synthesize
from .score import Melody, Score, extract_melody

FEATURE_NAMES = (
    "key", "mode", "tempo", "direction",
    "avg_pitch", "pitch_range", "pitch_sd", "rms",
)


@dataclass(frozen=True)
class FeatureVector:
    """The eight per-tune features used in the correlation and labeling steps."""

    key_pc: int
    mode: int
    tempo_bpm: float | None
    direction: int
    average_pitch: float
    pitch_range: int
    pitch_sd: float
    rms: float

    def value(self, name: str, default_tempo: float = 120.0) -> float:
        if name == "key":
            return float(self.key_pc)
        if name == "mode":
            return float(self.mode)
        if name == "tempo":
            return float(self.tempo_bpm if self.tempo_bpm is not None else default_tempo)
        if name == "direction":
            return float(self.direction)
        if name == "avg_pitch":
            return self.average_pitch
        if name == "pitch_range":
            return float(self.pitch_range)
        if name == "pitch_sd":
            return self.pitch_sd
        if name == "rms":
            return self.rms
        raise KeyError(name)


def _weighted_moments(melody: Melody) -> tuple[float, float]:
    total = sum((duration for _, duration in melody), Fraction(0))
    mean = sum((duration * pitch for pitch, duration in melody), Fraction(0)) / total
    var = sum(
        (duration * (Fraction(pitch) - mean) ** 2 for pitch, duration in melody),
        Fraction(0),
    ) / total
    return float(mean), math.sqrt(float(var))


def average_pitch(score: Score) -> float:
    """Duration-weighted mean MIDI pitch over sounded notes."""
    return _weighted_moments(extract_melody(score))[0]


def pitch_sd(score: Score) -> float:
    """Duration-weighted standard deviation of MIDI pitch."""
    return _weighted_moments(extract_melody(score))[1]


def pitch_range(score: Score) -> int:
    """Highest minus lowest sounded pitch in semitones."""
    pitches = [pitch for pitch, _ in extract_melody(score)]
    return max(pitches) - min(pitches)


def direction(score: Score) -> int:
    """1 when rising intervals outweigh falling ones, else 0.

    Each consecutive pair of sounded notes votes with the duration of the
    arrival note; equal pitches vote for neither side, and an overall tie
    counts as not ascending.
    """
    melody = extract_melody(score)
    ascending = Fraction(0)
    descending = Fraction(0)
    for (prev, _), (pitch, duration) in zip(melody, melody[1:]):
        if pitch > prev:
            ascending += duration
        elif pitch < prev:
            descending += duration
    return 1 if ascending > descending else 0


def rms_loudness(
    score: Score,
    velocity: int = DEFAULT_VELOCITY,
    sample_rate: int = 44100,
) -> float:
    """RMS amplitude of the synthesized rendering."""
    return rms(synthesize(PerformanceScore(score, velocity), sample_rate))


def extract_features(
    score: Score,
    velocity: int = DEFAULT_VELOCITY,
    sample_rate: int = 44100,
) -> FeatureVector:
    """All eight features of a tune; raises ``EmptyMelodyError`` for all-rest scores."""
    melody = extract_melody(score)
    mean, sd = _weighted_moments(melody)
    pitches = [pitch for pitch, _ in melody]
    return FeatureVector(
        key_pc=score.key.tonic_pc,
        mode=score.key.mode_class,
        tempo_bpm=score.tempo_bpm,
        direction=direction(score),
        average_pitch=mean,
        pitch_range=max(pitches) - min(pitches),
        pitch_sd=sd,
        rms=rms_loudness(score, velocity, sample_rate),
    )


__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "average_pitch",
    "direction",
    "extract_features",
    "pitch_range",
    "pitch_sd",
    "rms_loudness",
]
