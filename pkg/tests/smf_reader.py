"""Minimal standard MIDI file reader used as an independent test oracle.

Implemented straight from the SMF format rules (chunk framing,
variable-length quantities, running status, meta and sysex payloads)
without touching the package writer, so tests check real byte layout
instead of comparing the writer to itself.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

# data byte counts per channel-message status nibble
_CHANNEL_LENGTHS = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


@dataclass(frozen=True)
class SmfEvent:
    tick: int
    status: int  # full status byte; 0xFF for meta, 0xF0/0xF7 for sysex
    data: bytes  # channel data bytes, or meta type byte + payload


@dataclass(frozen=True)
class SmfNote:
    pitch: int
    velocity: int
    on_tick: int
    off_tick: int


@dataclass(frozen=True)
class SmfFile:
    fmt: int
    ntrks: int
    division: int
    tracks: list[list[SmfEvent]]

    def tempo_changes(self) -> list[tuple[int, int]]:
        """(tick, microseconds per quarter) from Set Tempo meta events."""
        out = []
        for track in self.tracks:
            for event in track:
                if event.status == 0xFF and event.data[0] == 0x51:
                    payload = event.data[1:]
                    if len(payload) != 3:
                        raise ValueError("tempo meta payload must be 3 bytes")
                    out.append((event.tick, int.from_bytes(payload, "big")))
        return out

    def notes(self) -> list[SmfNote]:
        """Pair note-ons with note-offs; velocity-0 note-on counts as off."""
        active: dict[tuple[int, int], list[tuple[int, int]]] = {}
        out = []
        for track in self.tracks:
            for event in track:
                kind = event.status & 0xF0
                if kind not in (0x80, 0x90):
                    continue
                channel = event.status & 0x0F
                pitch, velocity = event.data
                key = (channel, pitch)
                if kind == 0x90 and velocity > 0:
                    active.setdefault(key, []).append((event.tick, velocity))
                else:
                    if not active.get(key):
                        raise ValueError(f"note-off without note-on for pitch {pitch}")
                    on_tick, on_velocity = active[key].pop(0)
                    out.append(SmfNote(pitch, on_velocity, on_tick, event.tick))
        dangling = [key for key, stack in active.items() if stack]
        if dangling:
            raise ValueError(f"unterminated notes: {sorted(dangling)}")
        out.sort(key=lambda note: (note.on_tick, note.pitch))
        return out


def _read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise ValueError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise ValueError("variable-length quantity exceeds four bytes")


def _read_track(data: bytes) -> list[SmfEvent]:
    events = []
    pos = 0
    tick = 0
    running = None
    saw_end = False
    while pos < len(data):
        if saw_end:
            raise ValueError("bytes after end-of-track meta event")
        delta, pos = _read_vlq(data, pos)
        tick += delta
        first = data[pos]
        if first == 0xFF:
            meta_type = data[pos + 1]
            length, pos = _read_vlq(data, pos + 2)
            payload = data[pos : pos + length]
            if len(payload) != length:
                raise ValueError("truncated meta event")
            pos += length
            events.append(SmfEvent(tick, 0xFF, bytes([meta_type]) + payload))
            if meta_type == 0x2F:
                saw_end = True
        elif first in (0xF0, 0xF7):
            length, pos = _read_vlq(data, pos + 1)
            events.append(SmfEvent(tick, first, data[pos : pos + length]))
            pos += length
        else:
            if first & 0x80:
                status = first
                pos += 1
            elif running is None:
                raise ValueError("data byte with no running status")
            else:
                status = running
            running = status
            count = _CHANNEL_LENGTHS.get(status >> 4)
            if count is None:
                raise ValueError(f"unsupported status byte {status:#x}")
            payload = data[pos : pos + count]
            if len(payload) != count or any(b & 0x80 for b in payload):
                raise ValueError("bad channel message data bytes")
            pos += count
            events.append(SmfEvent(tick, status, payload))
    if not saw_end:
        raise ValueError("track missing end-of-track meta event")
    return events


def read_smf(blob: bytes) -> SmfFile:
    if blob[:4] != b"MThd":
        raise ValueError("missing MThd chunk")
    header_length, fmt, ntrks, division = struct.unpack(">IHHH", blob[4:14])
    if header_length != 6:
        raise ValueError(f"MThd length {header_length}, expected 6")
    if division & 0x8000:
        raise ValueError("SMPTE divisions not supported")
    pos = 8 + header_length
    tracks = []
    while pos < len(blob):
        chunk_id = blob[pos : pos + 4]
        (chunk_length,) = struct.unpack(">I", blob[pos + 4 : pos + 8])
        body = blob[pos + 8 : pos + 8 + chunk_length]
        if len(body) != chunk_length:
            raise ValueError("truncated chunk")
        pos += 8 + chunk_length
        if chunk_id == b"MTrk":
            tracks.append(_read_track(body))
    if len(tracks) != ntrks:
        raise ValueError(f"header claims {ntrks} tracks, found {len(tracks)}")
    return SmfFile(fmt=fmt, ntrks=ntrks, division=division, tracks=tracks)
