"""Character-level admissibility guard for sampling well-formed tunes.

``CanonicalAbcGuard`` walks the grammar of canonically serialized tunes one
character at a time: the X/L/M/(Q)/K header block, then a single body line
whose bars must add up.  ``allows`` is a pure query, ``push`` advances.  A
sampler that only emits allowed characters can still stall by running out
of budget, but it can never emit an unparseable prefix: durations are vetoed
before they overflow the bar, barlines are vetoed until the bar is exactly
full (pickup and final bars excepted), and octave marks are vetoed at the
edges of the MIDI range.

The guard accepts a superset of canonical text (for instance reducible
duration fractions) but everything it accepts parses, and every canonical
serialization is accepted.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import TuneSemanticError
from .generator import END
from .notation import MODE_SUFFIX
from .score import LETTER_PC, KeySignature

_UPPER = set("ABCDEFG")
_LOWER = set("abcdefg")
_STARTERS = _UPPER | _LOWER | set("^_=z")

_MAX_HEADER_NUMBER = 99
_MAX_DURATION_NUMBER = 99
_MAX_TEMPO_INT_DIGITS = 4
_MAX_TEMPO_FRAC_DIGITS = 10
_MAX_BARS = 128


def _valid_suffixes(tonic: str) -> set[str]:
    out = set()
    for mode, suffix in MODE_SUFFIX.items():
        try:
            KeySignature(tonic, mode)
        except TuneSemanticError:
            continue
        out.add(suffix)
    return out


class CanonicalAbcGuard:
    """State machine over the canonical tune grammar; see module docstring."""

    def __init__(self):
        self._stage = "lit"
        self._lit = "X:1\nL:"
        self._lit_next = "l_num"
        self._a = ""          # numeric buffer (header numerators, tempo int)
        self._b = ""          # numeric buffer (header denominators, tempo frac)
        self.unit: Fraction | None = None
        self.meter: Fraction | None = None
        self._tonic = ""
        self._suffix = ""
        self._suffix_pool: set[str] = set()
        # body state
        self._fill = Fraction(0)
        self._bars = 0
        self._must_end = False
        # pending note
        self._rest = False
        self._lower = False
        self._midi = 0
        self._marks_done = False
        self._num: int | None = None
        self._den = 1
        self._seg_open = False
        self._seg: int | None = None

    # -- public interface ---------------------------------------------------

    def allows(self, ch: str) -> bool:
        return self._step(ch, apply=False)

    def push(self, ch: str):
        if not self._step(ch, apply=True):
            raise ValueError(f"character {ch!r} not allowed in stage {self._stage}")

    # -- helpers ------------------------------------------------------------

    def _pending_duration(self) -> Fraction:
        den = self._den * ((self._seg or 2) if self._seg_open else 1)
        return self.unit * Fraction(self._num or 1, den)

    def _reset_pending(self):
        self._rest = False
        self._lower = False
        self._midi = 0
        self._marks_done = False
        self._num = None
        self._den = 1
        self._seg_open = False
        self._seg = None

    def _start_note(self, ch: str, apply: bool) -> bool:
        # caller has verified there is room in the bar
        if ch in "^_=":
            if apply:
                self._reset_pending()
                self._stage = "acc"
                self._a = ch
            return True
        if ch == "z":
            if apply:
                self._reset_pending()
                self._rest = True
                self._stage = "note"
            return True
        if ch in _UPPER or ch in _LOWER:
            if apply:
                self._begin_pitch(ch, 0)
            return True
        return False

    def _begin_pitch(self, letter: str, alt: int):
        self._reset_pending()
        self._lower = letter in _LOWER
        self._midi = (72 if self._lower else 60) + LETTER_PC[letter.upper()] + alt
        self._stage = "note"

    def _commit_pending(self):
        self._fill += self._pending_duration()
        self._reset_pending()

    def _close_bar(self):
        pickup = self._bars == 0
        self._must_end = self._fill < self.meter and not pickup
        self._bars += 1
        self._fill = Fraction(0)
        self._stage = "bar"

    # -- the machine --------------------------------------------------------

    def _step(self, ch: str, apply: bool) -> bool:
        stage = self._stage
        if stage == "lit":
            if ch != self._lit[0]:
                return False
            if apply:
                self._lit = self._lit[1:]
                if not self._lit:
                    self._stage = self._lit_next
                    self._a = ""
                    self._b = ""
            return True

        if stage in ("l_num", "m_num"):
            if ch.isdigit():
                new = self._a + ch
                if (ch == "0" and not self._a) or int(new) > _MAX_HEADER_NUMBER:
                    return False
                if apply:
                    self._a = new
                return True
            if ch == "/" and self._a:
                if apply:
                    self._stage = "l_den" if stage == "l_num" else "m_den"
                return True
            return False

        if stage in ("l_den", "m_den"):
            if ch.isdigit():
                new = self._b + ch
                if (ch == "0" and not self._b) or int(new) > _MAX_HEADER_NUMBER:
                    return False
                if apply:
                    self._b = new
                return True
            if ch == "\n" and self._b:
                if apply:
                    value = Fraction(int(self._a), int(self._b)) * 4
                    if stage == "l_den":
                        self.unit = value
                        self._lit, self._lit_next, self._stage = "M:", "m_num", "lit"
                    else:
                        self.meter = value
                        self._stage = "after_m"
                return True
            return False

        if stage == "after_m":
            if ch == "Q":
                if apply:
                    self._lit, self._lit_next, self._stage = ":1/4=", "q_int", "lit"
                return True
            if ch == "K":
                if apply:
                    self._lit, self._lit_next, self._stage = ":", "k_tonic", "lit"
                return True
            return False

        if stage == "q_int":
            if ch.isdigit():
                if ch == "0" and not self._a:
                    return False
                if len(self._a) >= _MAX_TEMPO_INT_DIGITS:
                    return False
                if apply:
                    self._a += ch
                return True
            if ch == "." and self._a:
                if apply:
                    self._stage = "q_frac"
                return True
            if ch == "\n" and self._a:
                if apply:
                    self._lit, self._lit_next, self._stage = "K:", "k_tonic", "lit"
                return True
            return False

        if stage == "q_frac":
            if ch.isdigit():
                if len(self._b) >= _MAX_TEMPO_FRAC_DIGITS:
                    return False
                if apply:
                    self._b += ch
                return True
            if ch == "\n" and self._b:
                if apply:
                    self._lit, self._lit_next, self._stage = "K:", "k_tonic", "lit"
                return True
            return False

        if stage == "k_tonic":
            if ch in _UPPER:
                if apply:
                    self._tonic = ch
                    self._suffix = ""
                    self._suffix_pool = _valid_suffixes(ch)
                    self._stage = "k_mode"
                return True
            return False

        if stage == "k_mode":
            if ch in "#b" and len(self._tonic) == 1 and not self._suffix:
                tonic = self._tonic + ch
                pool = _valid_suffixes(tonic)
                if not pool:
                    return False
                if apply:
                    self._tonic = tonic
                    self._suffix_pool = pool
                return True
            if ch == "\n":
                if self._suffix not in self._suffix_pool:
                    return False
                if apply:
                    self._stage = "start"
                return True
            extended = self._suffix + ch
            if any(s.startswith(extended) for s in self._suffix_pool):
                if apply:
                    self._suffix = extended
                return True
            return False

        if stage == "start":
            if ch in _STARTERS:
                return self._start_note(ch, apply)
            return False

        if stage == "acc":
            mark = self._a
            if ch == mark[0] and mark in ("^", "_"):
                if apply:
                    self._a = mark + ch
                return True
            if ch in _UPPER or ch in _LOWER:
                if apply:
                    alt = {"^": 1, "^^": 2, "_": -1, "__": -2, "=": 0}[mark]
                    self._begin_pitch(ch, alt)
                return True
            return False

        if stage == "note":
            dur = self._pending_duration()
            if ch == "'":
                ok = (
                    self._lower and not self._rest and not self._marks_done
                    and self._midi + 12 <= 127
                )
                if ok and apply:
                    self._midi += 12
                return ok
            if ch == ",":
                ok = (
                    not self._lower and not self._rest and not self._marks_done
                    and self._midi - 12 >= 0
                )
                if ok and apply:
                    self._midi -= 12
                return ok
            if ch.isdigit():
                digit = int(ch)
                if self._seg_open:
                    new = (self._seg or 0) * 10 + digit
                    if (digit == 0 and self._seg is None) or new > _MAX_DURATION_NUMBER:
                        return False
                    if apply:
                        self._seg = new
                        self._marks_done = True
                    return True
                if self._den != 1:
                    return False
                new = (self._num or 0) * 10 + digit
                if (digit == 0 and self._num is None) or new > _MAX_DURATION_NUMBER:
                    return False
                if apply:
                    self._num = new
                    self._marks_done = True
                return True
            if ch == "/":
                if apply:
                    if self._seg_open:
                        self._den *= self._seg or 2
                        self._seg = None
                    self._seg_open = True
                    self._marks_done = True
                return True
            if ch in _STARTERS:
                if self._fill + dur >= self.meter or self._bars >= _MAX_BARS:
                    return False
                if not self._start_note(ch, False):
                    return False
                if apply:
                    self._commit_pending()
                    self._start_note(ch, True)
                return True
            if ch == "|":
                # underfull is fine for the pickup bar, and otherwise forces
                # the tune to end right after this barline (_must_end)
                if self._fill + dur > self.meter:
                    return False
                if apply:
                    self._commit_pending()
                    self._close_bar()
                return True
            return False

        if stage == "bar":
            if self._must_end:
                if ch == "]":
                    if apply:
                        self._stage = "final"
                    return True
                if ch == "\n":
                    if apply:
                        self._stage = "done"
                    return True
                return False
            if ch in _STARTERS:
                if self._bars >= _MAX_BARS:
                    return False
                return self._start_note(ch, apply)
            if ch == "|":
                # a section mark must be followed by another bar
                if self._bars >= _MAX_BARS:
                    return False
                if apply:
                    self._stage = "section"
                return True
            if ch == "]":
                if apply:
                    self._stage = "final"
                return True
            if ch == "\n":
                if apply:
                    self._stage = "done"
                return True
            return False

        if stage == "section":
            if ch in _STARTERS and self._bars < _MAX_BARS:
                return self._start_note(ch, apply)
            return False

        if stage == "final":
            if ch == "\n":
                if apply:
                    self._stage = "done"
                return True
            return False

        if stage == "done":
            if ch == END:
                if apply:
                    self._stage = "end"
                return True
            return False

        return False


__all__ = ["CanonicalAbcGuard"]
