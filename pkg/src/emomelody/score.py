"""Immutable score model for monophonic melodies, plus structural transforms.

Pitches are MIDI semitone indices (middle C = 60) and durations are exact
rationals in quarter-note units, so nothing here accumulates floating-point
error.  All transforms return new ``Score`` values; nothing is mutated.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyMelodyError, PitchRangeError, TuneSemanticError

MIDI_MIN = 0
MIDI_MAX = 127

# Natural pitch class per note letter.
LETTER_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

# Position of each natural letter on the circle of fifths, with C = 0.
CIRCLE_POSITION = {"F": -1, "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5}
CIRCLE_LETTERS = ("F", "C", "G", "D", "A", "E", "B")

# Sharps are added in F C G D A E B order; flats in the reverse.
SHARP_ORDER = ("F", "C", "G", "D", "A", "E", "B")
FLAT_ORDER = ("B", "E", "A", "D", "G", "C", "F")

# How far a mode's key signature sits from the major signature of the same tonic.
MODE_FIFTH_OFFSET = {
    "major": 0,
    "ionian": 0,
    "mixolydian": -1,
    "dorian": -2,
    "minor": -3,
    "aeolian": -3,
    "phrygian": -4,
    "locrian": -5,
    "lydian": 1,
}

# Modes with a major third above the tonic; the rest classify as minor.
MAJOR_THIRD_MODES = frozenset({"major", "ionian", "lydian", "mixolydian"})

# Canonical display names for the 12 pitch classes.
PITCH_CLASS_NAMES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "G#/Ab", "A", "Bb", "B")

# Melody: ordered (midi pitch, duration) pairs, rests dropped.
Melody = list[tuple[int, Fraction]]


@dataclass(frozen=True)
class Note:
    """One sounded note or rest.  Rests carry no pitch."""

    pitch: int | None
    duration: Fraction

    def __post_init__(self):
        if not isinstance(self.duration, Fraction):
            object.__setattr__(self, "duration", Fraction(self.duration))
        if self.duration <= 0:
            raise TuneSemanticError(f"note duration must be positive, got {self.duration}")
        if self.pitch is not None and not (MIDI_MIN <= self.pitch <= MIDI_MAX):
            raise TuneSemanticError(f"pitch {self.pitch} outside MIDI range 0-127")

    @property
    def is_rest(self) -> bool:
        return self.pitch is None


def _spelled_tonic_parts(tonic: str) -> tuple[str, int]:
    """Split a spelled tonic like 'Eb' or 'F#' into (letter, alteration)."""
    if not tonic or tonic[0].upper() not in LETTER_PC:
        raise TuneSemanticError(f"unknown tonic {tonic!r}")
    letter = tonic[0].upper()
    rest = tonic[1:]
    if rest == "":
        return letter, 0
    if rest == "#":
        return letter, 1
    if rest == "b":
        return letter, -1
    raise TuneSemanticError(f"unknown tonic {tonic!r}")


@dataclass(frozen=True)
class KeySignature:
    """A spelled tonic plus mode, e.g. ('Eb', 'major') or ('E', 'dorian').

    The spelling matters: C# major and Db major share pitch classes but
    assign different default alterations to the note letters.
    """

    tonic: str
    mode: str = "major"

    def __post_init__(self):
        letter, alt = _spelled_tonic_parts(self.tonic)
        object.__setattr__(self, "tonic", letter + {0: "", 1: "#", -1: "b"}[alt])
        if self.mode not in MODE_FIFTH_OFFSET:
            raise TuneSemanticError(f"unknown mode {self.mode!r}")
        if not -7 <= self.fifths <= 7:
            raise TuneSemanticError(
                f"key {self.tonic} {self.mode} needs {self.fifths} sharps; "
                "only signatures between 7 flats and 7 sharps are supported"
            )

    @property
    def circle_position(self) -> int:
        letter, alt = _spelled_tonic_parts(self.tonic)
        return CIRCLE_POSITION[letter] + 7 * alt

    @property
    def fifths(self) -> int:
        """Signed accidental count: sharps positive, flats negative."""
        return self.circle_position + MODE_FIFTH_OFFSET[self.mode]

    @property
    def tonic_pc(self) -> int:
        letter, alt = _spelled_tonic_parts(self.tonic)
        return (LETTER_PC[letter] + alt) % 12

    @property
    def mode_class(self) -> int:
        """1 for major-third modes, 0 for minor-third modes."""
        return 1 if self.mode in MAJOR_THIRD_MODES else 0

    @property
    def pitch_class_name(self) -> str:
        return PITCH_CLASS_NAMES[self.tonic_pc]

    def letter_alterations(self) -> dict[str, int]:
        """Default alteration per note letter implied by the signature."""
        alts = dict.fromkeys(LETTER_PC, 0)
        f = self.fifths
        if f > 0:
            for letter in SHARP_ORDER[:f]:
                alts[letter] = 1
        elif f < 0:
            for letter in FLAT_ORDER[:-f]:
                alts[letter] = -1
        return alts

    @classmethod
    def from_fifths(cls, fifths: int, mode: str = "major") -> "KeySignature":
        """Key signature with the given accidental count, spelled for `mode`."""
        if mode not in MODE_FIFTH_OFFSET:
            raise TuneSemanticError(f"unknown mode {mode!r}")
        position = fifths - MODE_FIFTH_OFFSET[mode]
        letter = CIRCLE_LETTERS[(position + 1) % 7]
        acc = (position + 1) // 7
        if not -1 <= acc <= 1:
            raise TuneSemanticError(f"no single-accidental spelling for fifths={fifths} {mode}")
        return cls(letter + {0: "", 1: "#", -1: "b"}[acc], mode)


@dataclass(frozen=True)
class Score:
    """A parsed monophonic tune.

    `meter` keeps its notated numerator/denominator (6/8 is not 3/4 here);
    `unit_note_length` is the default note duration in quarter-note units.
    `section_boundaries` lists measure indices that end an internal section.
    """

    key: KeySignature
    meter: tuple[int, int]
    unit_note_length: Fraction
    measures: tuple[tuple[Note, ...], ...]
    tempo_bpm: float | None = None
    section_boundaries: tuple[int, ...] = ()
    final_marker: bool = False

    def __post_init__(self):
        object.__setattr__(self, "meter", (int(self.meter[0]), int(self.meter[1])))
        object.__setattr__(
            self, "measures", tuple(tuple(measure) for measure in self.measures)
        )
        object.__setattr__(
            self, "section_boundaries", tuple(sorted(set(self.section_boundaries)))
        )
        if not isinstance(self.unit_note_length, Fraction):
            object.__setattr__(self, "unit_note_length", Fraction(self.unit_note_length))
        self._validate()

    def _validate(self):
        num, den = self.meter
        if num <= 0 or den <= 0:
            raise TuneSemanticError(f"meter {num}/{den} is not positive")
        if self.unit_note_length <= 0:
            raise TuneSemanticError("unit note length must be positive")
        if self.tempo_bpm is not None and not self.tempo_bpm > 0:
            raise TuneSemanticError(f"tempo must be positive, got {self.tempo_bpm}")
        if len(self.measures) < 1:
            raise TuneSemanticError("score needs at least one measure")
        full = self.meter_value
        last = len(self.measures) - 1
        for i, measure in enumerate(self.measures):
            total = sum((note.duration for note in measure), Fraction(0))
            if total == 0:
                raise TuneSemanticError(f"measure {i + 1} is empty")
            if total > full:
                raise TuneSemanticError(
                    f"measure {i + 1} overfull: {total} exceeds meter {num}/{den}"
                )
            if total < full and i not in (0, last):
                raise TuneSemanticError(
                    f"measure {i + 1} underfull: {total} of meter {num}/{den}"
                )
        for idx in self.section_boundaries:
            if not 0 <= idx < last:
                raise TuneSemanticError(f"section boundary {idx} outside 0..{last - 1}")

    @property
    def meter_value(self) -> Fraction:
        """Length of one full measure in quarter-note units."""
        return Fraction(self.meter[0], self.meter[1]) * 4

    def notes(self):
        for measure in self.measures:
            yield from measure

    @property
    def total_duration(self) -> Fraction:
        return sum((note.duration for note in self.notes()), Fraction(0))

    def sounded_pitches(self) -> list[int]:
        return [note.pitch for note in self.notes() if not note.is_rest]


def extract_melody(score: Score) -> Melody:
    """Ordered (pitch, duration) pairs of the sounded notes; rests dropped."""
    melody = [(note.pitch, note.duration) for note in score.notes() if not note.is_rest]
    if not melody:
        raise EmptyMelodyError("score contains no sounded note")
    return melody


def transpose(score: Score, semitones: int, target_key: KeySignature) -> Score:
    """Shift every sounded pitch by `semitones` and rewrite the key header."""
    if abs(semitones) > 11:
        raise ValueError(f"transpose step must satisfy |semitones| <= 11, got {semitones}")
    measures = []
    for measure in score.measures:
        shifted = []
        for note in measure:
            if note.is_rest:
                shifted.append(note)
                continue
            pitch = note.pitch + semitones
            if not MIDI_MIN <= pitch <= MIDI_MAX:
                raise PitchRangeError(
                    f"transposing by {semitones} moves pitch {note.pitch} to {pitch}, "
                    "outside MIDI range 0-127"
                )
            shifted.append(Note(pitch, note.duration))
        measures.append(tuple(shifted))
    return dataclasses.replace(score, key=target_key, measures=tuple(measures))


def shift_octaves(score: Score, octaves: int) -> tuple[Score, int]:
    """Shift pitches by whole octaves, reducing the shift until all pitches fit.

    Returns the shifted score and the octave count actually applied.  A score
    with no sounded notes is returned unchanged with shift 0.
    """
    pitches = score.sounded_pitches()
    if not pitches or octaves == 0:
        return score, 0
    lo, hi = min(pitches), max(pitches)
    applied = octaves
    step = 1 if octaves > 0 else -1
    while applied != 0 and not (MIDI_MIN <= lo + 12 * applied and hi + 12 * applied <= MIDI_MAX):
        applied -= step
    if applied == 0:
        return score, 0
    measures = tuple(
        tuple(
            note if note.is_rest else Note(note.pitch + 12 * applied, note.duration)
            for note in measure
        )
        for measure in score.measures
    )
    return dataclasses.replace(score, measures=measures), applied


def segment(score: Score, chunk_measures: int = 20, merge_tail_at: int = 10) -> list[Score]:
    """Partition a score into ~`chunk_measures`-bar chunks.

    A trailing chunk of `merge_tail_at` or fewer measures is merged into the
    previous chunk, so chunk sizes stay within [1, chunk_measures + merge_tail_at].
    Every chunk is terminated (final marker set).
    """
    n = len(score.measures)
    sizes = []
    remaining = n
    while remaining > 0:
        if sizes and remaining <= merge_tail_at:
            sizes[-1] += remaining
            remaining = 0
        else:
            take = min(chunk_measures, remaining)
            sizes.append(take)
            remaining -= take
    chunks = []
    start = 0
    for size in sizes:
        stop = start + size
        boundaries = tuple(
            i - start for i in score.section_boundaries if start <= i < stop - 1
        )
        chunks.append(
            dataclasses.replace(
                score,
                measures=score.measures[start:stop],
                section_boundaries=boundaries,
                final_marker=True,
            )
        )
        start = stop
    return chunks
