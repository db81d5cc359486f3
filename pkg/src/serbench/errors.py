"""Exception types shared across the package.

Every failure mode callers are expected to handle has its own class so that
tests and the CLI can match on the condition rather than on message text.
"""


class SerBenchError(Exception):
    """Base class for all errors raised by this package."""


# audio_io
class UnsupportedFormat(SerBenchError):
    """WAV codec or sample layout outside the supported PCM16/float32 subset."""


class CorruptHeader(SerBenchError):
    """File is not a well-formed RIFF/WAVE container."""


class EmptyAfterTrim(SerBenchError):
    """No frame of the clip exceeds the silence threshold."""


class NotMono(SerBenchError):
    """Operation requires a single-channel clip."""


class InvalidRate(SerBenchError):
    """Sample rate must be a positive integer."""


# acoustic_features
class TooShort(SerBenchError):
    """Clip shorter than one analysis window."""


class UnknownPreset(SerBenchError):
    """Feature preset name is not one of the defined presets."""


# corpus
class MissingColumn(SerBenchError):
    """CSV header lacks a required column."""


class DuplicateId(SerBenchError):
    """Utterance id appears more than once in a manifest."""


class UnknownEmotion(SerBenchError):
    """Emotion label outside the four-emotion vocabulary."""


class EmptyManifest(SerBenchError):
    """Manifest contains no records."""


# partition
class InvalidK(SerBenchError):
    """Fold count must be at least 2."""


class TooFewGroups(SerBenchError):
    """Fewer distinct speakers than requested folds."""


class UnknownCorpus(SerBenchError):
    """Named corpus not present in the manifest."""


class SingleCorpus(SerBenchError):
    """Cross-corpus evaluation needs at least two corpora."""


# learners
class DimensionMismatch(SerBenchError):
    """Array shapes are inconsistent with each other or with the model."""


class SingleClass(SerBenchError):
    """Training data contains only one class label."""


class NotFinite(SerBenchError):
    """Non-finite value encountered in data or model parameters."""


# metrics
class LengthMismatch(SerBenchError):
    """Paired label sequences have different lengths."""


class LabelOutOfRange(SerBenchError):
    """Class label outside [0, n_classes)."""


class AbsentClass(SerBenchError):
    """A class has no true instance; the evaluation split is invalid."""


class InvalidCounts(SerBenchError):
    """Rating counts violate the constant-raters-per-item requirement."""


# runner
class InconsistentReports(SerBenchError):
    """Report set is empty, mixes model families, or double-fills a table cell."""


class ExtractionFailed(SerBenchError):
    """One or more utterances failed feature extraction."""


class LeakageError(SerBenchError):
    """A split leaked utterances or speakers between train and test."""


class ConfigError(SerBenchError):
    """Experiment or synthesis config file is malformed."""
