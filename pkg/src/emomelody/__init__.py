"""Symbolic-music toolkit: ABC parsing, feature extraction, emotion-labelled
corpus building, character language models and MIDI/audio rendering."""

from .errors import (
    DegenerateSeriesError,
    EmptyBufferError,
    EmptyCorpusError,
    EmptyMelodyError,
    ExhaustedRetriesError,
    LengthMismatchError,
    MalformedTableError,
    PitchRangeError,
    TuneError,
    TuneSemanticError,
    TuneSyntaxError,
    UnsupportedFeatureError,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    average_pitch,
    direction,
    extract_features,
    pitch_range,
    pitch_sd,
    rms_loudness,
)
from .generator import (
    DEFAULT_MAX_CHARS,
    BarPatchSequence,
    CharLanguageModel,
    GenerationFailure,
    detokenize,
    generate,
    load_model,
    parse_rate,
    save_model,
    tokenize,
)
from .guard import CanonicalAbcGuard
from .labeling import (
    ControlCode,
    LabeledTune,
    balance,
    expand_keys,
    label_corpus,
    levenshtein,
    make_control_code,
    quadrant_from_affect,
    rough_label,
    sd_threshold,
    similarity,
    transposition_targets,
)
from .midi import (
    AudioBuffer,
    PerformanceScore,
    rms,
    synthesize,
    to_midi_bytes,
    write_midi,
    write_wav,
)
from .musicxml import parse_musicxml, read_musicxml
from .notation import iter_tunes, parse_abc, serialize_abc
from .score import KeySignature, Note, Score, extract_melody, segment, shift_octaves, transpose
from .stats import CorrelationRow, correlation_report, gaussian_kde, pearson
from .template import (
    TEMPLATE_FEATURES,
    TEMPLATES,
    EmotionTemplate,
    GeneratedPiece,
    apply_template,
    conditioning_label,
    generate_with_emotion,
)

__all__ = [
    "DEFAULT_MAX_CHARS",
    "FEATURE_NAMES",
    "TEMPLATES",
    "TEMPLATE_FEATURES",
    "AudioBuffer",
    "BarPatchSequence",
    "CanonicalAbcGuard",
    "CharLanguageModel",
    "ControlCode",
    "CorrelationRow",
    "DegenerateSeriesError",
    "EmotionTemplate",
    "EmptyBufferError",
    "EmptyCorpusError",
    "EmptyMelodyError",
    "ExhaustedRetriesError",
    "FeatureVector",
    "GeneratedPiece",
    "GenerationFailure",
    "KeySignature",
    "LabeledTune",
    "LengthMismatchError",
    "MalformedTableError",
    "Note",
    "PerformanceScore",
    "PitchRangeError",
    "Score",
    "TuneError",
    "TuneSemanticError",
    "TuneSyntaxError",
    "UnsupportedFeatureError",
    "apply_template",
    "average_pitch",
    "balance",
    "conditioning_label",
    "correlation_report",
    "detokenize",
    "direction",
    "expand_keys",
    "extract_features",
    "extract_melody",
    "gaussian_kde",
    "generate",
    "generate_with_emotion",
    "iter_tunes",
    "label_corpus",
    "levenshtein",
    "load_model",
    "make_control_code",
    "parse_abc",
    "parse_musicxml",
    "parse_rate",
    "pearson",
    "pitch_range",
    "pitch_sd",
    "quadrant_from_affect",
    "read_musicxml",
    "rms",
    "rms_loudness",
    "rough_label",
    "save_model",
    "sd_threshold",
    "segment",
    "serialize_abc",
    "shift_octaves",
    "similarity",
    "synthesize",
    "to_midi_bytes",
    "tokenize",
    "transpose",
    "transposition_targets",
    "write_midi",
    "write_wav",
]

__version__ = "0.1.0"
