"""Minimal MusicXML ingestion for monophonic scores.

Reads plain ``.musicxml``/``.xml`` documents and compressed ``.mxl``
archives, keeping only what the toolkit models: one part, one voice,
pitches, rests, exact durations, key, time signature and tempo.  Anything
that would need real engraving semantics (chords, tuplets, multiple parts,
cursor rewinds) raises ``UnsupportedFeatureError`` instead of being guessed
at.
"""

from __future__ import annotations

import zipfile
from fractions import Fraction
from xml.etree import ElementTree

from .errors import TuneSemanticError, UnsupportedFeatureError
from .score import LETTER_PC, KeySignature, Note, Score

# eighth note: the customary unit for folk transcriptions
CANONICAL_UNIT = Fraction(1, 2)

_XML_MODES = {
    "major": "major", "minor": "minor", "ionian": "ionian", "dorian": "dorian",
    "phrygian": "phrygian", "lydian": "lydian", "mixolydian": "mixolydian",
    "aeolian": "aeolian", "locrian": "locrian",
}


def _text(element, tag: str) -> str | None:
    child = element.find(tag)
    if child is None or child.text is None:
        return None
    return child.text.strip()


def _require_int(element, tag: str, where: str) -> int:
    value = _text(element, tag)
    if value is None:
        raise TuneSemanticError(f"missing <{tag}> in {where}")
    try:
        return int(value)
    except ValueError:
        raise TuneSemanticError(f"non-integer <{tag}> in {where}: {value!r}") from None


def parse_musicxml(text: str | bytes) -> Score:
    """Build a score from one MusicXML document."""
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise TuneSemanticError(f"malformed MusicXML: {exc}") from None
    if root.tag != "score-partwise":
        raise UnsupportedFeatureError(f"unsupported document root <{root.tag}>")
    parts = root.findall("part")
    if len(parts) != 1:
        raise UnsupportedFeatureError(f"expected exactly one part, found {len(parts)}")

    divisions: int | None = None
    key = KeySignature("C", "major")
    meter: tuple[int, int] | None = None
    tempo: float | None = None
    measures: list[tuple[Note, ...]] = []
    boundaries: set[int] = set()
    final_at = -1

    for measure_index, measure in enumerate(parts[0].findall("measure")):
        where = f"measure {measure_index + 1}"
        for attributes in measure.findall("attributes"):
            value = _text(attributes, "divisions")
            if value is not None:
                divisions = int(value)
                if divisions <= 0:
                    raise TuneSemanticError(f"divisions must be positive in {where}")
            key_el = attributes.find("key")
            if key_el is not None:
                fifths = _require_int(key_el, "fifths", where)
                mode_text = (_text(key_el, "mode") or "major").lower()
                mode = _XML_MODES.get(mode_text)
                if mode is None:
                    raise UnsupportedFeatureError(f"unsupported mode {mode_text!r}")
                key = KeySignature.from_fifths(fifths, mode)
            time_el = attributes.find("time")
            if time_el is not None:
                meter = (
                    _require_int(time_el, "beats", where),
                    _require_int(time_el, "beat-type", where),
                )
        for sound in measure.iter("sound"):
            bpm = sound.get("tempo")
            if bpm is not None and tempo is None:
                tempo = float(bpm)

        notes: list[Note] = []
        for child in measure:
            if child.tag in ("backup", "forward"):
                raise UnsupportedFeatureError(
                    f"<{child.tag}> (multiple voices) in {where}"
                )
            if child.tag != "note":
                continue
            if child.find("chord") is not None:
                raise UnsupportedFeatureError(f"chord in {where}")
            if child.find("grace") is not None:
                raise UnsupportedFeatureError(f"grace note in {where}")
            if child.find("time-modification") is not None:
                raise UnsupportedFeatureError(f"tuplet in {where}")
            if divisions is None:
                raise TuneSemanticError(f"note before <divisions> in {where}")
            ticks = _require_int(child, "duration", where)
            if ticks <= 0:
                raise TuneSemanticError(f"non-positive duration in {where}")
            duration = Fraction(ticks, divisions)
            if child.find("rest") is not None:
                notes.append(Note(None, duration))
                continue
            pitch_el = child.find("pitch")
            if pitch_el is None:
                raise TuneSemanticError(f"note without <pitch> or <rest> in {where}")
            step = _text(pitch_el, "step") or ""
            if step not in LETTER_PC:
                raise TuneSemanticError(f"bad <step> {step!r} in {where}")
            alter = int(float(_text(pitch_el, "alter") or "0"))
            octave = _require_int(pitch_el, "octave", where)
            midi = (octave + 1) * 12 + LETTER_PC[step] + alter
            if not 0 <= midi <= 127:
                raise TuneSemanticError(f"pitch {midi} outside MIDI range in {where}")
            notes.append(Note(midi, duration))

        if notes:
            measures.append(tuple(notes))
        elif measure.find("note") is None and not measures:
            continue  # leading empty measure, some exporters emit one
        else:
            raise TuneSemanticError(f"{where} contains no notes")

        for barline in measure.findall("barline"):
            style = _text(barline, "bar-style")
            if style == "light-light" or barline.find("repeat") is not None:
                # a repeat opening this measure bounds the previous one
                back = 2 if barline.get("location") == "left" else 1
                if len(measures) - back >= 0:
                    boundaries.add(len(measures) - back)
            if style == "light-heavy":
                final_at = len(measures) - 1

    if meter is None:
        raise TuneSemanticError("missing time signature")
    if not measures:
        raise TuneSemanticError("score has no measures")
    last = len(measures) - 1
    return Score(
        key=key,
        meter=meter,
        unit_note_length=CANONICAL_UNIT,
        measures=tuple(measures),
        tempo_bpm=tempo,
        section_boundaries=tuple(sorted(b for b in boundaries if b < last)),
        final_marker=final_at == last,
    )


def _mxl_payload(path) -> bytes:
    with zipfile.ZipFile(path) as archive:
        target = None
        try:
            container = ElementTree.fromstring(archive.read("META-INF/container.xml"))
            rootfile = container.find(".//rootfile")
            if rootfile is not None:
                target = rootfile.get("full-path")
        except KeyError:
            pass
        if target is None:
            candidates = [
                name for name in archive.namelist()
                if not name.startswith("META-INF/") and name.endswith((".xml", ".musicxml"))
            ]
            if not candidates:
                raise TuneSemanticError("no MusicXML document inside the archive")
            target = candidates[0]
        return archive.read(target)


def read_musicxml(path) -> Score:
    """Read a ``.musicxml``/``.xml`` file or an ``.mxl`` archive."""
    if zipfile.is_zipfile(path):
        return parse_musicxml(_mxl_payload(path))
    with open(path, "rb") as handle:
        return parse_musicxml(handle.read())


__all__ = ["CANONICAL_UNIT", "parse_musicxml", "read_musicxml"]
