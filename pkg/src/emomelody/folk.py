"""Deterministic synthetic tune corpora for training, evaluation, and demos.

Four tune families, one per emotion quadrant, each with its own key, meter,
and pitch register so the rough-label proxies (mode class, pitch spread)
recover the intended quadrant:

    Q1  D major,  4/4, wide register    Q2  E minor, 4/4, wide register
    Q3  A minor,  6/8, narrow register  Q4  G major, 6/8, narrow register

Bars are drawn from per-family pools built so that any context of up to
six characters determines a continuation that closes its bar exactly:
every bar opens and closes with family-unique letters (so windows that
straddle a barline never match across families), and a global registry
rejects any bar whose interior windows collide with another bar's at a
different offset (so mid-bar jumps always preserve the remaining length).
A low-order character model trained on these tunes therefore samples
parseable text at a high rate without any grammar mask.

Everything is seeded; the same (n, seed) always yields the same corpus.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .labeling import ControlCode, make_control_code
from .notation import parse_abc
from .score import KeySignature, Note, Score

_WINDOW = 6  # longest context the corpus is hardened against

QUADRANT_ORDER = ("Q1", "Q2", "Q3", "Q4")


@dataclass(frozen=True)
class TuneFamily:
    label: str
    key: KeySignature
    meter: tuple[int, int]
    letters: str
    opening: str  # every bar starts with this letter
    cadence: str  # every bar ends with this letter

    @property
    def cells(self) -> int:
        """Eighth-note slots in one full bar."""
        return int(Fraction(self.meter[0], self.meter[1]) * 8)


FAMILIES: dict[str, TuneFamily] = {
    "Q1": TuneFamily("Q1", KeySignature("D"), (4, 4), "DEFGABcdefga", "d", "g"),
    "Q2": TuneFamily("Q2", KeySignature("E", "minor"), (4, 4), "EFGABcdefgab", "e", "B"),
    "Q3": TuneFamily("Q3", KeySignature("A", "minor"), (6, 8), "ABcd", "A", "d"),
    "Q4": TuneFamily("Q4", KeySignature("G"), (6, 8), "GABc", "G", "c"),
}

_POOL_SIZE = 20
_BARS_CHOICES = (8, 12, 16)


def _build_pool(
    family: TuneFamily, rng: random.Random, registry: dict[str, tuple[int, int]]
) -> tuple[str, ...]:
    """Bars for one family, vetted against the cross-pool window registry."""
    pool: list[str] = []
    seen: set[str] = set()
    attempts = 0
    while len(pool) < _POOL_SIZE:
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError("bar pool construction failed to converge")
        middle = "".join(
            rng.choice(family.letters) for _ in range(family.cells - 2)
        )
        bar = family.opening + middle + family.cadence + "|"
        if bar in seen:
            continue
        # interior windows: every 6-gram not containing the barline
        windows = [
            (bar[o: o + _WINDOW], o)
            for o in range(len(bar) - _WINDOW)  # last window holds the '|'
        ]
        key = family.cells  # bars of equal cell count may interleave safely
        if any(
            registry.get(w, (key, o)) != (key, o) for w, o in windows
        ):
            continue
        for w, o in windows:
            registry[w] = (key, o)
        seen.add(bar)
        pool.append(bar)
    return tuple(pool)


def _pools(seed) -> dict[str, tuple[str, ...]]:
    rng = random.Random(f"{seed}\x1fpools")
    registry: dict[str, tuple[int, int]] = {}
    return {
        label: _build_pool(family, rng, registry)
        for label, family in FAMILIES.items()
    }


@dataclass(frozen=True)
class FolkTune:
    label: str
    text: str
    score: Score


def _assemble(family: TuneFamily, pool: tuple[str, ...], rng: random.Random) -> str:
    bars = rng.choice(_BARS_CHOICES)
    sections = rng.choice((1, 2))
    picks = [rng.choice(pool) for _ in range(bars)]
    if sections == 2:
        cut = bars // 2
        picks[cut - 1] = picks[cut - 1] + "|"  # widen to a section boundary
    picks[-1] = picks[-1][:-1] + "|]"
    headers = (
        "X:1\nL:1/8\n"
        f"M:{family.meter[0]}/{family.meter[1]}\n"
        f"K:{family.key.tonic}{'' if family.key.mode == 'major' else 'm'}\n"
    )
    return headers + "".join(picks) + "\n"


def make_tunes(n: int, seed=0) -> list[FolkTune]:
    """n tunes cycling through the four quadrant families."""
    pools = _pools(seed)
    rng = random.Random(f"{seed}\x1ftunes")
    tunes: list[FolkTune] = []
    for index in range(n):
        label = QUADRANT_ORDER[index % 4]
        text = _assemble(FAMILIES[label], pools[label], rng)
        tunes.append(FolkTune(label=label, text=text, score=parse_abc(text)))
    return tunes


def training_records(n: int, seed=0) -> list[tuple[ControlCode, str]]:
    """Quadrant-balanced (control code, tune text) pairs ready for training."""
    records = []
    for tune in make_tunes(n, seed):
        code = make_control_code(tune.score, tune.label)
        records.append((code, tune.text))
    return records


# --- free-form random scores: oracle fodder for feature and round-trip tests

_METERS = ((4, 4), (3, 4), (2, 4), (6, 8), (2, 2), (9, 8))
_UNITS = (Fraction(1, 8), Fraction(1, 4), Fraction(1, 16))
# durations in sixteenth-note grains; 1 stays available so any gap can close
_GRAINS = (1, 2, 2, 3, 4, 4, 6, 8, 12)


def _random_key(rng: random.Random) -> KeySignature:
    candidates = []
    for letter in "CDEFGAB":
        for accidental in ("", "#", "b"):
            for mode in ("major", "minor", "dorian", "mixolydian", "lydian",
                         "phrygian", "aeolian", "ionian"):
                try:
                    candidates.append(KeySignature(letter + accidental, mode))
                except Exception:
                    pass
    return rng.choice(candidates)


def random_score(rng: random.Random, max_measures: int = 10) -> Score:
    """One structurally valid score with varied rhythm, register, and keys."""
    meter = rng.choice(_METERS)
    span = int(Fraction(meter[0], meter[1]) * 16)  # sixteenths per full bar
    n_measures = rng.randint(1, max_measures)
    pitch = rng.randint(52, 78)
    measures = []
    for index in range(n_measures):
        target = span
        if index == 0 and n_measures > 1 and rng.random() < 0.2:
            target = rng.randint(1, span - 1)  # pickup bar may run short
        notes = []
        left = target
        while left > 0:
            grain = rng.choice([g for g in _GRAINS if g <= left])
            if rng.random() < 0.12:
                notes.append(Note(None, Fraction(grain, 4)))
            else:
                pitch = min(108, max(24, pitch + rng.randint(-4, 4)))
                notes.append(Note(pitch, Fraction(grain, 4)))
            left -= grain
        measures.append(tuple(notes))
    boundaries = sorted(
        rng.sample(range(0, n_measures - 1), k=min(rng.randint(0, 2), n_measures - 1))
    ) if n_measures > 1 else []
    tempo = None
    if rng.random() < 0.5:
        tempo = float(rng.randint(40, 240))
        if rng.random() < 0.2:
            tempo += 0.5
    return Score(
        key=_random_key(rng),
        meter=meter,
        unit_note_length=rng.choice(_UNITS),
        measures=tuple(measures),
        tempo_bpm=tempo,
        section_boundaries=tuple(boundaries),
        final_marker=rng.random() < 0.6,
    )


def random_scores(n: int, seed=0) -> list[Score]:
    rng = random.Random(f"{seed}\x1fscores")
    return [random_score(rng) for _ in range(n)]


# --- mixed ingest corpus: mostly clean tunes, a seeded minority of flaws

@dataclass(frozen=True)
class CorpusEntry:
    text: str
    ok: bool
    flaw: str | None


def _sugar(text: str, rng: random.Random, serial: int) -> str:
    """Parse-preserving notational noise: titles, comments, line breaks."""
    lines = text.rstrip("\n").split("\n")
    lines[0] = f"X:{serial}"
    pos = 1
    if rng.random() < 0.7:
        lines.insert(pos, f"T:Air no. {serial}")
        pos += 1
    if rng.random() < 0.3:
        lines.insert(pos, "O:synthetic")
        pos += 1
    if rng.random() < 0.3:
        lines.insert(pos, "R:reel  % dance form")
        pos += 1
    body = lines[-1]
    if rng.random() < 0.5:
        # breathing room after barlines, without splitting || or |] tokens
        body = (
            body.replace("|]", "\x01").replace("||", "\x02")
            .replace("|", "| ").replace("\x02", "|| ").replace("\x01", "|]")
            .rstrip()
        )
    if rng.random() < 0.4:
        cut = body.find("|", len(body) // 2)
        while 0 < cut < len(body) - 2 and body[cut + 1] in "|]":
            cut = body.find("|", cut + 2)
        if 0 < cut < len(body) - 2:
            body = body[: cut + 1] + "\n" + body[cut + 1:].lstrip()
    if rng.random() < 0.3:
        body = body.replace("|]", "|")  # plain final barline
    lines[-1] = body
    return "\n".join(lines) + "\n"


_FLAWS = (
    ("voice-header", lambda t: t.replace("K:", "V:1\nK:", 1)),
    ("lyrics-header", lambda t: t.replace("K:", "w:la la\nK:", 1)),
    ("slur", lambda t: _in_body(t, lambda b: "(" + b[:2] + ")" + b[2:])),
    ("decoration", lambda t: _in_body(t, lambda b: "!trill!" + b)),
    ("chord-symbol", lambda t: _in_body(t, lambda b: '"Am"' + b)),
    ("grace-notes", lambda t: _in_body(t, lambda b: "{ag}" + b)),
    ("variant-ending", lambda t: _in_body(t, lambda b: b.replace("|", "|1 ", 1))),
    ("voice-overlay", lambda t: _in_body(t, lambda b: b[:4] + "&" + b[4:])),
    ("multi-measure-rest", lambda t: _in_body(t, lambda b: "Z4" + b)),
    ("overfull-measure", lambda t: _in_body(t, lambda b: b.replace("|", "z8|", 1))),
)


def _in_body(text: str, edit) -> str:
    lines = text.rstrip("\n").split("\n")
    lines[-1] = edit(lines[-1])
    return "\n".join(lines) + "\n"


def mixed_corpus(n: int, seed=0, flaw_fraction: float = 0.15) -> list[CorpusEntry]:
    """Raw ABC texts: ~(1 - flaw_fraction) clean, the rest rejectable."""
    rng = random.Random(f"{seed}\x1fmixed")
    base = make_tunes(n, seed)
    n_flawed = round(n * flaw_fraction)
    flawed_at = set(rng.sample(range(n), k=n_flawed))
    entries: list[CorpusEntry] = []
    for index, tune in enumerate(base):
        text = _sugar(tune.text, rng, index + 1)
        if index in flawed_at:
            name, wreck = _FLAWS[index % len(_FLAWS)]
            entries.append(CorpusEntry(text=wreck(text), ok=False, flaw=name))
        else:
            parse_abc(text)  # sugar must stay parseable by construction
            entries.append(CorpusEntry(text=text, ok=True, flaw=None))
    return entries


def corpus_file_text(entries: list[CorpusEntry]) -> str:
    return "\n".join(entry.text for entry in entries)


__all__ = [
    "FAMILIES",
    "QUADRANT_ORDER",
    "CorpusEntry",
    "FolkTune",
    "TuneFamily",
    "corpus_file_text",
    "make_tunes",
    "mixed_corpus",
    "random_score",
    "random_scores",
    "training_records",
]
