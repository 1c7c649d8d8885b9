"""Emotion templates: per-quadrant performance treatments over five features.

Two features are embedded in the conditioning label (mode, pitch spread),
three are applied to the finished score (tempo draw, octave shift, volume
gain).  Each feature draws randomness from its own stream derived from the
root seed, so ablating one feature cannot perturb the draws of another:
differential runs under a shared seed differ only in the ablated effect.

Quadrant treatments:

    Q1 (positive valence, high arousal): major, wide spread, 160-184 bpm, +5 dB
    Q2 (negative valence, high arousal): minor, wide spread, 184-228 bpm,
        two octaves down, +10 dB
    Q3 (negative valence, low arousal):  minor, narrow spread, 40-69 bpm,
        one octave down
    Q4 (positive valence, low arousal):  major, narrow spread, 40-69 bpm
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass

from .errors import ExhaustedRetriesError
from .generator import DEFAULT_MAX_CHARS, CharLanguageModel, GenerationFailure, generate
from .labeling import ControlCode, quadrant_from_affect
from .midi import DEFAULT_VELOCITY, PerformanceScore
from .score import Score, shift_octaves

TEMPLATE_FEATURES = ("mode", "pitch_sd", "tempo", "octave", "volume")
DEFAULT_RETRY_LIMIT = 16

_FALLBACK_CONTROL = ControlCode(
    label="Q1", sections=1, bars=8, similarity_level=10, first_section_bars=8
)


@dataclass(frozen=True)
class EmotionTemplate:
    tempo_range: tuple[int, int]
    octave_shift: int
    volume_db: float

    def pick_tempo(self, rng: random.Random) -> int:
        low, high = self.tempo_range
        return rng.randint(low, high)  # inclusive on both ends

    @property
    def velocity(self) -> int:
        scaled = round(DEFAULT_VELOCITY * 10 ** (self.volume_db / 20))
        return max(1, min(127, scaled))


TEMPLATES: dict[str, EmotionTemplate] = {
    "Q1": EmotionTemplate(tempo_range=(160, 184), octave_shift=0, volume_db=5.0),
    "Q2": EmotionTemplate(tempo_range=(184, 228), octave_shift=-2, volume_db=10.0),
    "Q3": EmotionTemplate(tempo_range=(40, 69), octave_shift=-1, volume_db=0.0),
    "Q4": EmotionTemplate(tempo_range=(40, 69), octave_shift=0, volume_db=0.0),
}


def _stream(seed, tag: str) -> random.Random:
    """Independent deterministic stream for one feature of one piece."""
    return random.Random(f"{seed}\x1f{tag}")


def conditioning_label(target: str, seed, features=TEMPLATE_FEATURES) -> str:
    """Quadrant label to condition generation on.

    The mode bit encodes valence and the pitch-spread bit encodes arousal;
    an ablated bit is replaced by a fair coin from that bit's own stream.
    """
    if target not in TEMPLATES:
        raise ValueError(f"unknown quadrant label {target!r}")
    valence = 1.0 if target in ("Q1", "Q4") else -1.0
    arousal = 1.0 if target in ("Q1", "Q2") else -1.0
    if "mode" not in features:
        valence = 1.0 if _stream(seed, "mode").random() < 0.5 else -1.0
    if "pitch_sd" not in features:
        arousal = 1.0 if _stream(seed, "pitch_sd").random() < 0.5 else -1.0
    return quadrant_from_affect(valence, arousal)


def apply_template(
    score: Score,
    label: str,
    seed=0,
    features=TEMPLATE_FEATURES,
) -> tuple[PerformanceScore, dict]:
    """Surface treatment of a finished score: tempo, octave, volume.

    Returns the performance plus a record of what was actually applied;
    the octave entry reports the achieved shift, which may be smaller than
    the template asks when the melody would leave the playable range.
    """
    template = TEMPLATES[label]
    applied: dict = {}
    if "tempo" in features:
        tempo = template.pick_tempo(_stream(seed, "tempo"))
        score = dataclasses.replace(score, tempo_bpm=float(tempo))
        applied["tempo"] = tempo
    if "octave" in features:
        score, shifted = shift_octaves(score, template.octave_shift)
        applied["octave"] = shifted
        if shifted != template.octave_shift:
            applied["octave_requested"] = template.octave_shift
    velocity = DEFAULT_VELOCITY
    if "volume" in features:
        velocity = template.velocity
        applied["volume_db"] = template.volume_db
    applied["velocity"] = velocity
    return PerformanceScore(score=score, velocity=velocity), applied


@dataclass(frozen=True)
class GeneratedPiece:
    label: str
    abc_text: str
    performance: PerformanceScore
    applied: dict
    attempts: int

    @property
    def score(self) -> Score:
        return self.performance.score


def generate_with_emotion(
    model: CharLanguageModel,
    label: str,
    seed=0,
    control: ControlCode | None = None,
    features=TEMPLATE_FEATURES,
    temperature: float = 0.7,
    max_retries: int = DEFAULT_RETRY_LIMIT,
    max_chars: int = DEFAULT_MAX_CHARS,
    guarded: bool = True,
) -> GeneratedPiece:
    """Sample a tune for an emotion quadrant and perform it.

    Sampling retries until the text parses, up to ``max_retries`` attempts;
    every attempt draws from streams derived from the root seed, so the
    whole pipeline is reproducible from (model, label, seed).
    """
    base = control if control is not None else _FALLBACK_CONTROL
    code = dataclasses.replace(base, label=conditioning_label(label, seed, features))
    failures: list[str] = []
    for attempt in range(1, max_retries + 1):
        result = generate(
            model, code.label, code, temperature,
            seed=f"{seed}\x1fsample\x1f{attempt}",
            max_chars=max_chars, guarded=guarded,
        )
        if isinstance(result, GenerationFailure):
            failures.append(result.reason)
            continue
        performance, applied = apply_template(result, label, seed, features)
        applied["conditioning"] = code.render()
        from .notation import serialize_abc

        return GeneratedPiece(
            label=label,
            abc_text=serialize_abc(result),
            performance=performance,
            applied=applied,
            attempts=attempt,
        )
    raise ExhaustedRetriesError(
        f"no parseable sample for {label} in {max_retries} attempts; "
        f"last failure: {failures[-1] if failures else 'n/a'}"
    )


__all__ = [
    "DEFAULT_RETRY_LIMIT",
    "TEMPLATE_FEATURES",
    "TEMPLATES",
    "EmotionTemplate",
    "GeneratedPiece",
    "apply_template",
    "conditioning_label",
    "generate_with_emotion",
]
