"""Render scores to standard MIDI files and to audio for loudness measurement.

The MIDI writer emits single-track format 0 files at 480 ticks per quarter
note with one tempo event.  The synthesizer renders each note as a sine at
its equal-tempered frequency with a short linear attack/release, which is
all the RMS loudness comparisons need.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptyBufferError
from .score import Score

TICKS_PER_QUARTER = 480
DEFAULT_TEMPO_BPM = 120.0
DEFAULT_VELOCITY = 64
EDGE_RAMP_SECONDS = 0.010


@dataclass(frozen=True)
class PerformanceScore:
    """A score plus the rendering choices that do not live in notation."""

    score: Score
    velocity: int = DEFAULT_VELOCITY

    def __post_init__(self):
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1..127")

    @property
    def tempo_bpm(self) -> float:
        return self.score.tempo_bpm or DEFAULT_TEMPO_BPM


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 44100

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)


def _events(performance: PerformanceScore) -> list[tuple[int, int, bytes]]:
    """(tick, order, message) triples; order makes note-offs precede note-ons."""
    events = []
    clock = Fraction(0)
    velocity = performance.velocity
    for note in performance.score.notes():
        if not note.is_rest:
            on = round(clock * TICKS_PER_QUARTER)
            off = round((clock + note.duration) * TICKS_PER_QUARTER)
            # sub-tick notes have no extent; emitting the pair at one tick
            # would sort the off ahead of its own on
            if off > on:
                events.append((on, 1, bytes((0x90, note.pitch, velocity))))
                events.append((off, 0, bytes((0x80, note.pitch, 0))))
        clock += note.duration
    events.sort(key=lambda item: item[:2])
    return events


def _vlq(value: int) -> bytes:
    if value < 0:
        raise ValueError("delta time must be non-negative")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def to_midi_bytes(performance: PerformanceScore) -> bytes:
    """Serialize to a format 0 standard MIDI file.

    Notes whose extent rounds below one tick are skipped; the clock still
    advances by their exact duration.
    """
    track = bytearray()
    micros = round(60_000_000 / performance.tempo_bpm)
    track += _vlq(0) + bytes((0xFF, 0x51, 0x03)) + micros.to_bytes(3, "big")
    tick = 0
    for at, _, message in _events(performance):
        track += _vlq(at - tick) + message
        tick = at
    track += _vlq(0) + bytes((0xFF, 0x2F, 0x00))
    header = struct.pack(">4sIHHH", b"MThd", 6, 0, 1, TICKS_PER_QUARTER)
    return header + struct.pack(">4sI", b"MTrk", len(track)) + bytes(track)


def write_midi(path, performance: PerformanceScore):
    with open(path, "wb") as handle:
        handle.write(to_midi_bytes(performance))


def synthesize(performance: PerformanceScore, sample_rate: int = 44100) -> AudioBuffer:
    """Render as mono float audio, one sine per note, rests as silence."""
    score = performance.score
    seconds_per_quarter = 60.0 / performance.tempo_bpm
    total = float(score.total_duration) * seconds_per_quarter
    out = np.zeros(max(round(total * sample_rate), 1), dtype=np.float64)
    amplitude = performance.velocity / 127.0
    clock = Fraction(0)
    for note in score.notes():
        start = round(float(clock) * seconds_per_quarter * sample_rate)
        clock += note.duration
        stop = round(float(clock) * seconds_per_quarter * sample_rate)
        if note.is_rest or stop <= start:
            continue
        stop = min(stop, len(out))
        count = stop - start
        t = np.arange(count) / sample_rate
        freq = 440.0 * 2.0 ** ((note.pitch - 69) / 12.0)
        tone = amplitude * np.sin(2.0 * np.pi * freq * t)
        ramp = min(round(EDGE_RAMP_SECONDS * sample_rate), count // 2)
        if ramp > 0:
            edge = np.linspace(0.0, 1.0, ramp, endpoint=False)
            tone[:ramp] *= edge
            tone[-ramp:] *= edge[::-1]
        out[start:stop] += tone
    peak = np.max(np.abs(out)) if len(out) else 0.0
    if peak > 1.0:
        out /= peak
    return AudioBuffer(samples=out, sample_rate=sample_rate)


def rms(buffer: AudioBuffer) -> float:
    """Root mean square amplitude of the buffer."""
    if len(buffer.samples) == 0:
        raise EmptyBufferError("cannot take RMS of an empty buffer")
    return float(np.sqrt(np.mean(np.square(buffer.samples, dtype=np.float64))))


def write_wav(path, buffer: AudioBuffer):
    """Write 16-bit mono PCM."""
    clipped = np.clip(buffer.samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).round().astype("<i2")
    target = path if hasattr(path, "write") else str(path)
    with wave.open(target, "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(buffer.sample_rate)
        handle.writeframes(pcm.tobytes())
