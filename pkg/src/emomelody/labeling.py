"""Emotion-quadrant labeling and corpus balancing.

Tunes are placed on the valence/arousal plane with two notation proxies:
mode stands in for valence (major bright, minor dark) and the duration
weighted pitch spread stands in for arousal (wide and jumpy reads as
excited, narrow as calm).  The spread threshold is the corpus median, so
labels are relative to the collection being processed.

Minor-mode quadrants are far rarer in folk corpora, so ``balance`` fans
every Q2/Q3 tune out to all fifteen key signatures (seven flats to seven
sharps, mode kept) while Q1/Q4 tunes pass through untouched.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass

from .errors import PitchRangeError
from .features import FeatureVector
from .score import KeySignature, Score, transpose

QUADRANTS = ("Q1", "Q2", "Q3", "Q4")

_CONTROL_RE = re.compile(r"^Q([1-4]) S:(\d+) B:(\d+) E:(\d+) D:(\d+)$")


def quadrant_from_affect(valence: float, arousal: float) -> str:
    """Russell-plane quadrant; zero counts as the high side of each axis."""
    if valence >= 0:
        return "Q1" if arousal >= 0 else "Q4"
    return "Q2" if arousal >= 0 else "Q3"


def sd_threshold(features: list[FeatureVector]) -> float:
    """Median pitch spread, the arousal cut for this corpus."""
    if not features:
        raise ValueError("cannot take a threshold over an empty corpus")
    return float(statistics.median(f.pitch_sd for f in features))


def rough_label(features: FeatureVector, threshold: float) -> str:
    """Proxy quadrant: mode for valence, pitch spread vs threshold for arousal."""
    valence = 1.0 if features.mode == 1 else -1.0
    arousal = 1.0 if features.pitch_sd >= threshold else -1.0
    return quadrant_from_affect(valence, arousal)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with the usual two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """1 - distance/max length; two empty strings count as identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


@dataclass(frozen=True)
class ControlCode:
    """Compact structure descriptor prepended to each training sequence.

    ``S`` counts sections, ``B`` bars, ``E`` buckets the mean similarity of
    consecutive sections into 0..10 (10 when there is a single section) and
    ``D`` is the bar count of the first section.
    """

    label: str
    sections: int
    bars: int
    similarity_level: int
    first_section_bars: int

    def __post_init__(self):
        if self.label not in QUADRANTS:
            raise ValueError(f"label must be one of {QUADRANTS}, got {self.label!r}")
        if self.sections < 1 or self.bars < 1 or self.first_section_bars < 1:
            raise ValueError("section and bar counts must be positive")
        if not 0 <= self.similarity_level <= 10:
            raise ValueError(f"similarity level {self.similarity_level} outside 0..10")

    def render(self) -> str:
        return (
            f"{self.label} S:{self.sections} B:{self.bars}"
            f" E:{self.similarity_level} D:{self.first_section_bars}"
        )

    @classmethod
    def parse(cls, text: str) -> "ControlCode":
        match = _CONTROL_RE.match(text)
        if match is None:
            raise ValueError(f"cannot parse control code {text!r}")
        return cls(
            label=f"Q{match.group(1)}",
            sections=int(match.group(2)),
            bars=int(match.group(3)),
            similarity_level=int(match.group(4)),
            first_section_bars=int(match.group(5)),
        )


def _section_texts(score: Score) -> list[str]:
    from .notation import serialize_abc

    body = serialize_abc(score).rstrip("\n").rsplit("\n", 1)[1]
    normalized = body.replace("|]", "|").replace("||", "|")
    edges = [-1, *score.section_boundaries, len(score.measures) - 1]
    measures = normalized.split("|")[: len(score.measures)]
    return [
        "|".join(measures[lo + 1: hi + 1])
        for lo, hi in zip(edges, edges[1:])
    ]


def make_control_code(score: Score, label: str) -> ControlCode:
    sections = _section_texts(score)
    if len(sections) == 1:
        level = 10
    else:
        mean = statistics.fmean(
            similarity(a, b) for a, b in zip(sections, sections[1:])
        )
        level = min(int(mean * 10), 10)
    boundaries = score.section_boundaries
    first = (boundaries[0] + 1) if boundaries else len(score.measures)
    return ControlCode(
        label=label,
        sections=len(sections),
        bars=len(score.measures),
        similarity_level=level,
        first_section_bars=first,
    )


@dataclass(frozen=True)
class LabeledTune:
    score: Score
    label: str
    control: ControlCode

    @classmethod
    def build(cls, score: Score, label: str) -> "LabeledTune":
        return cls(score=score, label=label, control=make_control_code(score, label))


def label_corpus(
    pairs: list[tuple[Score, FeatureVector]],
    threshold: float | None = None,
) -> tuple[list[LabeledTune], float]:
    """Label every tune, deriving the spread threshold from the corpus itself."""
    if threshold is None:
        threshold = sd_threshold([features for _, features in pairs])
    labeled = [
        LabeledTune.build(score, rough_label(features, threshold))
        for score, features in pairs
    ]
    return labeled, threshold


def transposition_targets(key: KeySignature) -> list[tuple[KeySignature, int]]:
    """All fifteen key signatures of the same mode with minimal semitone shifts."""
    targets = []
    for fifths in range(-7, 8):
        target = KeySignature.from_fifths(fifths, key.mode)
        delta = (target.tonic_pc - key.tonic_pc) % 12
        if delta > 6:
            delta -= 12
        targets.append((target, delta))
    return targets


def expand_keys(score: Score) -> tuple[list[Score], list[str]]:
    """Transposed copies in all fifteen keys, skipping any that leave MIDI range."""
    out = []
    warnings = []
    for target, delta in transposition_targets(score.key):
        try:
            out.append(transpose(score, delta, target))
        except PitchRangeError as exc:
            warnings.append(f"skipping {target.tonic} {target.mode}: {exc}")
    return out, warnings


def balance(labeled: list[LabeledTune]) -> tuple[list[LabeledTune], list[str]]:
    """Fan Q2/Q3 tunes out to all keys; Q1/Q4 pass through unchanged."""
    out = []
    warnings = []
    for item in labeled:
        if item.label in ("Q2", "Q3"):
            expanded, skipped = expand_keys(item.score)
            warnings.extend(skipped)
            out.extend(LabeledTune.build(s, item.label) for s in expanded)
        else:
            out.append(item)
    return out, warnings


__all__ = [
    "ControlCode",
    "LabeledTune",
    "QUADRANTS",
    "balance",
    "expand_keys",
    "label_corpus",
    "levenshtein",
    "make_control_code",
    "quadrant_from_affect",
    "rough_label",
    "sd_threshold",
    "similarity",
    "transposition_targets",
]
