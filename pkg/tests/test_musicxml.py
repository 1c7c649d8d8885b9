"""Minimal MusicXML ingestion: happy paths, rejections, .mxl archives."""

from __future__ import annotations

import zipfile
from fractions import Fraction

import pytest

from emomelody.errors import TuneSemanticError, UnsupportedFeatureError
from emomelody.musicxml import parse_musicxml, read_musicxml
from emomelody.notation import parse_abc
from emomelody.score import KeySignature


def doc(measures, divisions=2, fifths=2, mode="major", beats=4, beat_type=4):
    attrs = (
        f"<attributes><divisions>{divisions}</divisions>"
        f"<key><fifths>{fifths}</fifths><mode>{mode}</mode></key>"
        f"<time><beats>{beats}</beats><beat-type>{beat_type}</beat-type></time>"
        "</attributes>"
    )
    parts = []
    for i, body in enumerate(measures):
        head = attrs if i == 0 else ""
        parts.append(f'<measure number="{i + 1}">{head}{body}</measure>')
    return (
        '<score-partwise version="3.1"><part-list><score-part id="P1"/></part-list>'
        f'<part id="P1">{"".join(parts)}</part></score-partwise>'
    )


def note(step, octave, duration, alter=None):
    alter_el = f"<alter>{alter}</alter>" if alter is not None else ""
    return (
        f"<note><pitch><step>{step}</step>{alter_el}<octave>{octave}</octave></pitch>"
        f"<duration>{duration}</duration></note>"
    )


def rest(duration):
    return f"<note><rest/><duration>{duration}</duration></note>"


FULL = note("D", 4, 8)


class TestHappyPath:
    def test_pitches_durations_key(self):
        text = doc([note("D", 4, 2) + note("F", 4, 2, alter=1) + rest(2) + note("A", 4, 2), FULL])
        score = parse_musicxml(text)
        assert score.key == KeySignature("D")
        assert score.meter == (4, 4)
        assert score.sounded_pitches() == [62, 66, 69, 62]
        assert [n.duration for n in score.notes()] == [
            Fraction(1), Fraction(1), Fraction(1), Fraction(1), Fraction(4),
        ]
        assert score.unit_note_length == Fraction(1, 2)

    def test_matches_notation_parse(self):
        xml = parse_musicxml(doc([note("D", 4, 2) + note("E", 4, 2) + note("F", 4, 2, 1) + note("G", 4, 2), FULL]))
        abc = parse_abc("X:1\nL:1/8\nM:4/4\nK:D\nD2E2F2G2|D8|\n")
        assert xml == abc

    def test_mode_and_fifths(self):
        score = parse_musicxml(doc([FULL], fifths=-1, mode="dorian"))
        assert score.key == KeySignature("G", "dorian")

    def test_divisions_change_midstream(self):
        body2 = "<attributes><divisions>4</divisions></attributes>" + note("D", 4, 16)
        score = parse_musicxml(doc([FULL, body2]))
        assert [n.duration for n in score.notes()] == [Fraction(4), Fraction(4)]

    def test_first_tempo_wins(self):
        text = doc(['<sound tempo="96"/>' + FULL, '<sound tempo="200"/>' + FULL])
        assert parse_musicxml(text).tempo_bpm == 96.0

    def test_no_tempo(self):
        assert parse_musicxml(doc([FULL])).tempo_bpm is None

    def test_final_barline(self):
        text = doc([FULL, FULL + "<barline><bar-style>light-heavy</bar-style></barline>"])
        assert parse_musicxml(text).final_marker

    def test_section_barline(self):
        text = doc([FULL + "<barline><bar-style>light-light</bar-style></barline>", FULL])
        assert parse_musicxml(text).section_boundaries == (0,)

    def test_left_repeat_bounds_previous_measure(self):
        text = doc([FULL, '<barline location="left"><repeat direction="forward"/></barline>' + FULL, FULL])
        assert parse_musicxml(text).section_boundaries == (0,)

    def test_leading_empty_measure_skipped(self):
        text = doc(["", FULL])
        assert len(parse_musicxml(text).measures) == 1

    def test_bytes_accepted(self):
        assert parse_musicxml(doc([FULL]).encode()).meter == (4, 4)


class TestRejections:
    def test_malformed_xml(self):
        with pytest.raises(TuneSemanticError, match="malformed"):
            parse_musicxml("<score-partwise><part>")

    def test_wrong_root(self):
        with pytest.raises(UnsupportedFeatureError, match="root"):
            parse_musicxml("<score-timewise/>")

    def test_multiple_parts(self):
        text = doc([FULL]).replace("</part>", '</part><part id="P2"></part>')
        with pytest.raises(UnsupportedFeatureError, match="one part"):
            parse_musicxml(text)

    @pytest.mark.parametrize("marker,label", [
        ("<backup><duration>2</duration></backup>", "backup"),
        ("<forward><duration>2</duration></forward>", "forward"),
    ])
    def test_multi_voice_rejected(self, marker, label):
        with pytest.raises(UnsupportedFeatureError, match=label):
            parse_musicxml(doc([FULL + marker]))

    def test_chord_rejected(self):
        bad = FULL.replace("<note>", "<note><chord/>", 1)
        with pytest.raises(UnsupportedFeatureError, match="chord"):
            parse_musicxml(doc([bad]))

    def test_grace_rejected(self):
        bad = FULL.replace("<note>", "<note><grace/>", 1)
        with pytest.raises(UnsupportedFeatureError, match="grace"):
            parse_musicxml(doc([bad]))

    def test_tuplet_rejected(self):
        bad = FULL.replace(
            "<note>",
            "<note><time-modification><actual-notes>3</actual-notes></time-modification>",
            1,
        )
        with pytest.raises(UnsupportedFeatureError, match="tuplet"):
            parse_musicxml(doc([bad]))

    def test_note_before_divisions(self):
        text = doc([FULL]).replace("<divisions>2</divisions>", "")
        with pytest.raises(TuneSemanticError, match="divisions"):
            parse_musicxml(text)

    def test_nonpositive_duration(self):
        with pytest.raises(TuneSemanticError, match="duration"):
            parse_musicxml(doc([note("D", 4, 0)]))

    def test_bad_step(self):
        with pytest.raises(TuneSemanticError, match="step"):
            parse_musicxml(doc([note("J", 4, 8)]))

    def test_pitch_out_of_range(self):
        with pytest.raises(TuneSemanticError, match="MIDI"):
            parse_musicxml(doc([note("C", 11, 8)]))

    def test_missing_time_signature(self):
        text = doc([FULL]).replace(
            "<time><beats>4</beats><beat-type>4</beat-type></time>", ""
        )
        with pytest.raises(TuneSemanticError, match="time signature"):
            parse_musicxml(text)

    def test_unsupported_mode(self):
        with pytest.raises(UnsupportedFeatureError, match="mode"):
            parse_musicxml(doc([FULL], mode="pentatonic"))

    def test_interior_empty_measure(self):
        with pytest.raises(TuneSemanticError, match="no notes"):
            parse_musicxml(doc([FULL, "", FULL]))

    def test_note_without_pitch_or_rest(self):
        with pytest.raises(TuneSemanticError, match="pitch"):
            parse_musicxml(doc(["<note><duration>8</duration></note>"]))


class TestArchives:
    def write_mxl(self, path, with_container):
        payload = doc([FULL])
        with zipfile.ZipFile(path, "w") as archive:
            if with_container:
                archive.writestr(
                    "META-INF/container.xml",
                    '<container><rootfiles><rootfile full-path="music/score.xml"/>'
                    "</rootfiles></container>",
                )
                archive.writestr("music/score.xml", payload)
                archive.writestr("music/unrelated.txt", "not this")
            else:
                archive.writestr("score.musicxml", payload)

    def test_mxl_with_container(self, tmp_path):
        target = tmp_path / "piece.mxl"
        self.write_mxl(target, with_container=True)
        assert read_musicxml(target).sounded_pitches() == [62]

    def test_mxl_without_container(self, tmp_path):
        target = tmp_path / "piece.mxl"
        self.write_mxl(target, with_container=False)
        assert read_musicxml(target).sounded_pitches() == [62]

    def test_empty_archive(self, tmp_path):
        target = tmp_path / "piece.mxl"
        with zipfile.ZipFile(target, "w") as archive:
            archive.writestr("README.txt", "nothing musical")
        with pytest.raises(TuneSemanticError, match="archive"):
            read_musicxml(target)

    def test_plain_file(self, tmp_path):
        target = tmp_path / "piece.xml"
        target.write_text(doc([FULL]))
        assert read_musicxml(target).meter == (4, 4)
