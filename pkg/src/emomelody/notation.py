"""Strict parser and canonical serializer for a monophonic ABC dialect.

Accepted subset:

* headers ``X`` ``L`` ``M`` ``Q`` ``K`` (semantic), ``T`` and the standard
  metadata fields (``O`` ``R`` ``C`` ...) parsed and dropped;
* note letters ``A``-``G``/``a``-``g`` with octave marks ``'`` ``,``,
  accidentals ``^ ^^ _ __ =``, duration multipliers/divisors (``A2``,
  ``A3/2``, ``A/``, ``A//``), rests ``z``, ties ``-`` (accepted, notes kept
  separate), broken rhythm ``>`` ``<`` (expanded to explicit durations);
* barlines ``|`` ``||`` ``|]`` ``:|`` ``|:`` ``::``; repeats are treated as
  section boundaries, not expanded.

Everything else (tuplets, grace notes, chords, decorations, annotations,
lyrics, voices, variant endings) is rejected, so that a tune passing this
parser is clean by construction.  Serialization is canonical: headers in
X/L/M/Q/K order, compact note text, one measure per barline, ``||`` at
section boundaries and ``|]`` when the final marker is set.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import TuneSemanticError, TuneSyntaxError
from .score import (
    LETTER_PC,
    MIDI_MAX,
    MIDI_MIN,
    KeySignature,
    Note,
    Score,
)

IGNORED_HEADERS = set("ABCDFGHINOPRSTUWZ")
REJECTED_HEADERS = {
    "V": "multi-voice music is not supported",
    "w": "lyrics are not supported",
    "m": "macros are not supported",
    "s": "symbol lines are not supported",
}

MODE_ALIASES = {
    "": "major", "maj": "major", "major": "major", "ion": "ionian",
    "ionian": "ionian", "m": "minor", "min": "minor", "minor": "minor",
    "aeo": "aeolian", "aeolian": "aeolian", "dor": "dorian", "dorian": "dorian",
    "phr": "phrygian", "phrygian": "phrygian", "lyd": "lydian", "lydian": "lydian",
    "mix": "mixolydian", "mixolydian": "mixolydian", "loc": "locrian",
    "locrian": "locrian",
}

MODE_SUFFIX = {
    "major": "", "minor": "m", "dorian": "dor", "phrygian": "phr",
    "lydian": "lyd", "mixolydian": "mix", "aeolian": "aeo", "ionian": "ion",
    "locrian": "loc",
}

BARLINE_TOKENS = ("|]", "||", "|:", ":|", "::", "|")
SECTION_TOKENS = {"||", "|:", ":|", "::"}

_REJECTED_BODY_CHARS = {
    "(": "tuplets and slurs are not supported",
    ")": "tuplets and slurs are not supported",
    "{": "grace notes are not supported",
    "}": "grace notes are not supported",
    "[": "chords and inline fields are not supported",
    "]": "chords and inline fields are not supported",
    "!": "decorations are not supported",
    "~": "decorations are not supported",
    '"': "chord symbols and annotations are not supported",
    "&": "voice overlays are not supported",
    "*": "unsupported symbol",
    "$": "unsupported symbol",
    "x": "invisible rests are not supported",
    "X": "invisible rests are not supported",
    "Z": "multi-measure rests are not supported",
    "y": "spacers are not supported",
    "H": "decorations are not supported",
}

_SHARP_SPELLING = {
    0: ("C", 0), 1: ("C", 1), 2: ("D", 0), 3: ("D", 1), 4: ("E", 0), 5: ("F", 0),
    6: ("F", 1), 7: ("G", 0), 8: ("G", 1), 9: ("A", 0), 10: ("A", 1), 11: ("B", 0),
}
_FLAT_SPELLING = {
    0: ("C", 0), 1: ("D", -1), 2: ("D", 0), 3: ("E", -1), 4: ("E", 0), 5: ("F", 0),
    6: ("G", -1), 7: ("G", 0), 8: ("A", -1), 9: ("A", 0), 10: ("B", -1), 11: ("B", 0),
}

_KEY_FIELD_RE = re.compile(r"^([A-Ga-g])([#b]?)\s*([A-Za-z]*)\s*$")
_FRACTION_RE = re.compile(r"^(\d+)\s*/\s*(\d+)$")


def parse_key_field(value: str, line: int | None = None) -> KeySignature:
    """Parse a K: header value like ``C``, ``Em``, ``F#dor`` or ``Eb major``."""
    match = _KEY_FIELD_RE.match(value.strip())
    if not match:
        raise TuneSyntaxError(f"cannot parse key field {value.strip()!r}", line)
    letter, acc, mode_text = match.groups()
    mode = MODE_ALIASES.get(mode_text.lower())
    if mode is None:
        raise TuneSyntaxError(f"unknown mode {mode_text!r}", line)
    try:
        return KeySignature(letter.upper() + acc, mode)
    except TuneSemanticError as exc:
        raise TuneSemanticError(str(exc), line) from None


def _parse_meter_field(value: str, line: int) -> tuple[int, int]:
    value = value.strip()
    if value == "C":
        return (4, 4)
    if value == "C|":
        return (2, 2)
    match = _FRACTION_RE.match(value)
    if not match:
        raise TuneSyntaxError(f"cannot parse meter {value!r}", line)
    num, den = int(match.group(1)), int(match.group(2))
    if num <= 0 or den <= 0:
        raise TuneSemanticError(f"meter {value!r} is not positive", line)
    return (num, den)


def _parse_unit_field(value: str, line: int) -> Fraction:
    match = _FRACTION_RE.match(value.strip())
    if not match:
        raise TuneSyntaxError(f"cannot parse unit note length {value.strip()!r}", line)
    num, den = int(match.group(1)), int(match.group(2))
    if num <= 0 or den <= 0:
        raise TuneSemanticError("unit note length must be positive", line)
    # stored in quarter-note units
    return Fraction(num, den) * 4


def _parse_tempo_field(value: str, line: int) -> float:
    value = value.strip()
    if "=" in value:
        beat_text, _, bpm_text = value.partition("=")
        match = _FRACTION_RE.match(beat_text.strip())
        if not match:
            raise TuneSyntaxError(f"cannot parse tempo beat unit {beat_text.strip()!r}", line)
        beat = Fraction(int(match.group(1)), int(match.group(2)))
    else:
        bpm_text = value
        beat = Fraction(1, 4)
    try:
        rate = float(bpm_text.strip())
    except ValueError:
        raise TuneSyntaxError(f"cannot parse tempo {value!r}", line) from None
    bpm = rate * float(beat * 4)
    if not bpm > 0:
        raise TuneSemanticError(f"tempo must be positive, got {value!r}", line)
    return bpm


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


class _BodyParser:
    """Single pass over the tune body, tracking line/column for errors."""

    def __init__(self, key: KeySignature, meter: tuple[int, int], unit: Fraction):
        self.key_map = key.letter_alterations()
        # one full measure in quarter-note units
        self.meter_value = Fraction(meter[0], meter[1]) * 4
        self.unit = unit
        self.measures: list[tuple[Note, ...]] = []
        self.measure_starts: list[tuple[int, int]] = []
        self.current: list[Note] = []
        self.current_start: tuple[int, int] | None = None
        self.fill = Fraction(0)
        self.accidentals: dict[tuple[str, int], int] = {}
        self.boundaries: set[int] = set()
        self.final_pending = False
        self.broken: tuple[str, int, int] | None = None
        self.tied = False

    def feed_line(self, text: str, line_no: int):
        i = 0
        n = len(text)
        while i < n:
            ch = text[i]
            col = i + 1
            if ch in " \t":
                i += 1
                continue
            if ch == "|" or ch == ":":
                i = self._scan_barline(text, i, line_no)
                continue
            if ch in "^_=":
                i = self._scan_note(text, i, line_no)
                continue
            if ch == "z" or ("A" <= ch <= "G") or ("a" <= ch <= "g"):
                i = self._scan_note(text, i, line_no)
                continue
            if ch in "><":
                self._begin_broken(ch, line_no, col)
                if i + 1 < n and text[i + 1] in "><":
                    raise TuneSyntaxError("double broken rhythm is not supported", line_no, col)
                i += 1
                continue
            if ch == "-":
                if not self.current or self.current[-1].is_rest or self.tied:
                    raise TuneSyntaxError("tie must follow a sounded note", line_no, col)
                self.tied = True
                i += 1
                continue
            if ch.isdigit():
                raise TuneSyntaxError(
                    "digit outside a note duration (variant endings are not supported)",
                    line_no, col,
                )
            reason = _REJECTED_BODY_CHARS.get(ch, f"unexpected character {ch!r}")
            raise TuneSyntaxError(reason, line_no, col)

    def _begin_broken(self, ch: str, line_no: int, col: int):
        if not self.current:
            raise TuneSyntaxError("broken rhythm must follow a note", line_no, col)
        if self.broken:
            raise TuneSyntaxError("chained broken rhythm is not supported", line_no, col)
        if self.tied:
            raise TuneSyntaxError("broken rhythm cannot follow a tie", line_no, col)
        self.broken = (ch, line_no, col)

    def _scan_barline(self, text: str, i: int, line_no: int) -> int:
        col = i + 1
        token = next((t for t in BARLINE_TOKENS if text.startswith(t, i)), None)
        if token is None:
            raise TuneSyntaxError("':' must be part of a repeat barline", line_no, col)
        if self.broken:
            raise TuneSyntaxError("broken rhythm may not cross a barline", line_no, col)
        j = i + len(token)
        if j < len(text) and text[j].isdigit():
            raise TuneSyntaxError("variant endings are not supported", line_no, col)
        if self.current:
            self._commit_measure()
        self.final_pending = False
        if token == "|]":
            self.final_pending = True
        elif token in SECTION_TOKENS and self.measures:
            self.boundaries.add(len(self.measures) - 1)
        return j

    def _commit_measure(self):
        self.measures.append(tuple(self.current))
        self.measure_starts.append(self.current_start or (0, 0))
        self.current = []
        self.current_start = None
        self.fill = Fraction(0)
        self.accidentals = {}
        self.tied = False

    def _scan_note(self, text: str, i: int, line_no: int) -> int:
        col = i + 1
        if self.final_pending:
            # "|]" in the middle of a tune acts as a section boundary
            if self.measures:
                self.boundaries.add(len(self.measures) - 1)
            self.final_pending = False
        explicit: int | None = None
        ch = text[i]
        if ch in "^_=":
            if text.startswith("^^", i):
                explicit, i = 2, i + 2
            elif text.startswith("__", i):
                explicit, i = -2, i + 2
            else:
                explicit, i = {"^": 1, "_": -1, "=": 0}[ch], i + 1
            if i >= len(text) or not (("A" <= text[i] <= "G") or ("a" <= text[i] <= "g")):
                raise TuneSyntaxError("accidental must precede a note letter", line_no, col)
        letter_ch = text[i]
        is_rest = letter_ch == "z"
        if is_rest and explicit is not None:
            raise TuneSyntaxError("accidental must precede a note letter", line_no, col)
        i += 1
        octave = 1 if letter_ch.islower() and not is_rest else 0
        while i < len(text) and text[i] in "',":
            if is_rest:
                raise TuneSyntaxError("octave mark after a rest", line_no, i + 1)
            octave += 1 if text[i] == "'" else -1
            i += 1
        duration, i = self._scan_duration(text, i, line_no)
        if is_rest:
            pitch = None
        else:
            letter = letter_ch.upper()
            if explicit is not None:
                alt = explicit
                self.accidentals[(letter, octave)] = alt
            else:
                alt = self.accidentals.get((letter, octave), self.key_map[letter])
            pitch = 60 + 12 * octave + LETTER_PC[letter] + alt
            if not MIDI_MIN <= pitch <= MIDI_MAX:
                raise TuneSemanticError(f"pitch {pitch} outside MIDI range 0-127", line_no, col)
        self._append_note(pitch, duration, line_no, col)
        return i

    def _scan_duration(self, text: str, i: int, line_no: int) -> tuple[Fraction, int]:
        col = i + 1
        num = None
        while i < len(text) and text[i].isdigit():
            num = (num or 0) * 10 + int(text[i])
            i += 1
        if num == 0:
            raise TuneSyntaxError("zero duration", line_no, col)
        den = 1
        while i < len(text) and text[i] == "/":
            i += 1
            sub = None
            while i < len(text) and text[i].isdigit():
                sub = (sub or 0) * 10 + int(text[i])
                i += 1
            if sub == 0:
                raise TuneSyntaxError("zero duration divisor", line_no, col)
            den *= 2 if sub is None else sub
        return self.unit * Fraction(num or 1, den), i

    def _append_note(self, pitch: int | None, duration: Fraction, line_no: int, col: int):
        if self.current_start is None:
            self.current_start = (line_no, col)
        if self.broken:
            mark = self.broken[0]
            prev = self.current[-1]
            prev_factor = Fraction(3, 2) if mark == ">" else Fraction(1, 2)
            this_factor = Fraction(1, 2) if mark == ">" else Fraction(3, 2)
            self.current[-1] = Note(prev.pitch, prev.duration * prev_factor)
            self.fill += prev.duration * (prev_factor - 1)
            duration = duration * this_factor
            self.broken = None
        self.tied = False
        self.current.append(Note(pitch, duration))
        self.fill += duration
        if self.fill > self.meter_value:
            raise TuneSemanticError(
                f"measure {len(self.measures) + 1} overfull: {self.fill} exceeds "
                f"meter {self.meter_value}",
                line_no, col,
            )

    def finish(self, line_no: int) -> tuple[tuple, tuple, bool]:
        if self.broken:
            _, bl, bc = self.broken
            raise TuneSyntaxError("broken rhythm needs a following note", bl, bc)
        if self.current:
            self._commit_measure()
            self.final_pending = False
        if not self.measures:
            raise TuneSemanticError("tune has no measures", line_no)
        last = len(self.measures) - 1
        for idx in range(1, last):
            total = sum((n.duration for n in self.measures[idx]), Fraction(0))
            if total != self.meter_value:
                ml, mc = self.measure_starts[idx]
                raise TuneSemanticError(
                    f"measure {idx + 1} underfull: {total} of meter {self.meter_value}",
                    ml, mc,
                )
        boundaries = tuple(sorted(b for b in self.boundaries if b < last))
        return tuple(self.measures), boundaries, self.final_pending


def parse_abc(text: str) -> Score:
    """Parse one ABC tune (headers plus body) into a ``Score``.

    Raises ``TuneSyntaxError`` for malformed or unsupported notation and
    ``TuneSemanticError`` for structural violations, each pointing at the
    offending line/column.
    """
    lines = text.splitlines()
    headers: dict[str, str] = {}
    body_parser: _BodyParser | None = None
    saw_body_content = False
    line_no = 0
    for raw_line, line_no in zip(lines, range(1, len(lines) + 1)):
        line = _strip_comment(raw_line)
        if not line.strip():
            if saw_body_content:
                remainder = "".join(
                    _strip_comment(extra) for extra in lines[line_no:]
                ).strip()
                if remainder:
                    raise TuneSyntaxError("blank line inside a tune", line_no)
                break
            continue
        if body_parser is None:
            if len(line) >= 2 and line[1] == ":" and line[0].isalpha():
                field, value = line[0], line[2:].strip()
                if field in REJECTED_HEADERS:
                    raise TuneSyntaxError(REJECTED_HEADERS[field], line_no)
                if field in ("X", "L", "M", "Q", "K"):
                    if field in headers:
                        raise TuneSyntaxError(f"duplicate {field}: header", line_no)
                    headers[field] = value
                    if field == "K":
                        for name in ("X", "M", "L"):
                            if name not in headers:
                                raise TuneSemanticError(f"missing {name}: field", line_no)
                        body_parser = _BodyParser(
                            parse_key_field(headers["K"], line_no),
                            _parse_meter_field(headers["M"], line_no),
                            _parse_unit_field(headers["L"], line_no),
                        )
                elif field in IGNORED_HEADERS:
                    continue
                else:
                    raise TuneSyntaxError(f"unknown header {field}:", line_no)
            else:
                raise TuneSyntaxError("expected a header line before K:", line_no)
        else:
            stripped = line.strip()
            if (
                len(stripped) >= 2
                and stripped[1] == ":"
                and stripped[0].isalpha()
                and stripped[2:3] not in ("|", ":")
            ):
                # note letter followed by ":|" or "::" is music, anything
                # else shaped like a field line is rejected
                raise TuneSyntaxError(
                    "header fields inside the tune body are not supported", line_no
                )
            body_parser.feed_line(line, line_no)
            saw_body_content = True
    if "K" not in headers:
        raise TuneSemanticError("missing K: field", line_no or 1)
    if "X" in headers:
        if not headers["X"].isdigit():
            raise TuneSyntaxError(f"X: must be an integer, got {headers['X']!r}", 1)
    measures, boundaries, final_marker = body_parser.finish(line_no or 1)
    tempo = _parse_tempo_field(headers["Q"], line_no) if "Q" in headers else None
    return Score(
        key=parse_key_field(headers["K"]),
        meter=_parse_meter_field(headers["M"], 1),
        unit_note_length=_parse_unit_field(headers["L"], 1),
        measures=measures,
        tempo_bpm=tempo,
        section_boundaries=boundaries,
        final_marker=final_marker,
    )


def _duration_text(duration: Fraction, unit: Fraction) -> str:
    frac = duration / unit
    num, den = frac.numerator, frac.denominator
    if den == 1:
        return "" if num == 1 else str(num)
    if num == 1:
        return "/" if den == 2 else f"/{den}"
    return f"{num}/{den}"


def _pitch_text(pitch: int, alt: int | None, letter: str) -> str:
    base = LETTER_PC[letter] + (alt or 0)
    octave = (pitch - base - 60) // 12
    if octave >= 1:
        return letter.lower() + "'" * (octave - 1)
    return letter + "," * (-octave)


def _spell_note(
    pitch: int,
    key_map: dict[str, int],
    state: dict[tuple[str, int], int],
    prefer_sharps: bool,
) -> str:
    pc = pitch % 12
    for letter in "CDEFGAB":
        diff = (pc - LETTER_PC[letter]) % 12
        alt = {0: 0, 1: 1, 11: -1}.get(diff)
        if alt is None:
            continue
        octave = (pitch - LETTER_PC[letter] - alt - 60) // 12
        if state.get((letter, octave), key_map[letter]) == alt:
            return _pitch_text(pitch, alt, letter)
    table = _SHARP_SPELLING if prefer_sharps else _FLAT_SPELLING
    letter, alt = table[pc]
    octave = (pitch - LETTER_PC[letter] - alt - 60) // 12
    state[(letter, octave)] = alt
    mark = {1: "^", -1: "_", 0: "="}[alt]
    return mark + _pitch_text(pitch, alt, letter)


def serialize_abc(score: Score) -> str:
    """Canonical ABC text for a score; ``parse_abc`` restores an equal score."""
    unit = score.unit_note_length / 4
    lines = [
        "X:1",
        f"L:{unit.numerator}/{unit.denominator}",
        f"M:{score.meter[0]}/{score.meter[1]}",
    ]
    if score.tempo_bpm is not None:
        lines.append(f"Q:1/4={format(score.tempo_bpm, '.10g')}")
    lines.append(f"K:{score.key.tonic}{MODE_SUFFIX[score.key.mode]}")
    key_map = score.key.letter_alterations()
    prefer_sharps = score.key.fifths >= 0
    boundaries = set(score.section_boundaries)
    last = len(score.measures) - 1
    parts = []
    for i, measure in enumerate(score.measures):
        state: dict[tuple[str, int], int] = {}
        for note in measure:
            dur = _duration_text(note.duration, score.unit_note_length)
            if note.is_rest:
                parts.append("z" + dur)
            else:
                parts.append(_spell_note(note.pitch, key_map, state, prefer_sharps) + dur)
        if i == last:
            parts.append("|]" if score.final_marker else "|")
        else:
            parts.append("||" if i in boundaries else "|")
    return "\n".join(lines) + "\n" + "".join(parts) + "\n"


def iter_tunes(text: str):
    """Yield the individual tune texts of a file (tunes separated by blank lines)."""
    block: list[str] = []
    for line in text.splitlines():
        if line.strip():
            block.append(line)
        elif block:
            if any(entry.startswith("X:") for entry in block):
                yield "\n".join(block)
            block = []
    if block and any(entry.startswith("X:") for entry in block):
        yield "\n".join(block)
