"""Exception types shared across the toolkit."""


class TuneError(Exception):
    """Base class for everything raised while handling symbolic scores."""


class LocatedError(TuneError):
    """Error that can point at a line/column of source text."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class TuneSyntaxError(LocatedError):
    """Malformed token or header in notation text."""


class TuneSemanticError(LocatedError):
    """Well-formed text that violates a score invariant (overfull bar, bad pitch, ...)."""


class UnsupportedFeatureError(TuneError):
    """Input uses a notation feature outside the supported monophonic subset."""


class PitchRangeError(TuneError):
    """A transform would move a pitch outside the MIDI 0-127 range."""


class EmptyMelodyError(TuneError):
    """Score contains no sounded note."""


class EmptyCorpusError(TuneError):
    """An operation that needs at least one score/record got none."""


class DegenerateSeriesError(TuneError):
    """Statistical input is constant or otherwise unusable."""


class LengthMismatchError(TuneError):
    """Paired series have different lengths."""


class MalformedTableError(TuneError):
    """Feature table misses required columns or has unreadable cells."""


class ExhaustedRetriesError(TuneError):
    """Bounded retry loop ran out of attempts without a parseable generation."""


class EmptyBufferError(TuneError):
    """Audio buffer holds no samples."""
