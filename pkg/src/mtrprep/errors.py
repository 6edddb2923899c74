"""Exception hierarchy shared by every stage of the toolkit.

Each concrete error carries an ``exit_class`` used by the command line tool
to map failures onto distinct exit codes.
"""


class MtrError(Exception):
    exit_class = "error"


class FormatError(MtrError):
    exit_class = "format"


class MalformedRiff(FormatError):
    pass


class UnsupportedFormat(FormatError):
    pass


class InconsistentHeader(FormatError):
    pass


class UnsupportedChannelCount(FormatError):
    pass


class UnsupportedRate(FormatError):
    pass


class UnsupportedInput(FormatError):
    pass


class BadSignature(FormatError):
    pass


class TruncatedBlock(FormatError):
    pass


class AudioError(MtrError):
    exit_class = "format"


class EmptyClip(AudioError):
    pass


class SilentSignal(AudioError):
    pass


class SilentNoise(AudioError):
    pass


class RateMismatch(AudioError):
    pass


class InvalidFactor(AudioError):
    pass


class CorpusError(MtrError):
    exit_class = "config"


class MissingTranscript(CorpusError):
    pass


class DuplicateUtteranceId(CorpusError):
    pass


class UnknownStyleToken(CorpusError):
    pass


class ConfigError(MtrError):
    exit_class = "config"


class ThresholdExceeded(MtrError):
    exit_class = "threshold"


class ScoreError(MtrError):
    exit_class = "format"


class EmptyReference(ScoreError):
    pass


class EmptyList(ScoreError):
    pass


class ZeroBaseline(ScoreError):
    pass


class ColumnMismatch(ScoreError):
    pass


class MissingUtterance(ScoreError):
    pass
