"""Exception hierarchy for the disctok pipeline.

Three branches map onto the CLI exit codes: ConfigError (2),
DataError (3) and IoFailure (4).
"""


class DisctokError(Exception):
    """Base class for all disctok errors."""


class ConfigError(DisctokError):
    """Invalid configuration or parameters."""


class DataError(DisctokError):
    """Malformed, inconsistent or out-of-contract data."""


class IoFailure(DisctokError):
    """Filesystem-level failure (wraps OSError)."""


# --- config ---------------------------------------------------------------

class InvalidConfig(ConfigError):
    pass


class TargetBelowBaseVocab(ConfigError):
    pass


# --- data -----------------------------------------------------------------

class BadMagic(DataError):
    pass


class HeaderMismatch(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class TooFewDistinctPoints(DataError):
    pass


class DimMismatch(DataError):
    pass


class AlreadyDeduped(DataError):
    pass


class MissingRunLengths(DataError):
    pass


class VocabMismatch(DataError):
    pass


class FingerprintMismatch(DataError):
    pass


class CorruptPayload(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyTable(DataError):
    pass


class DegeneratePhoneDistribution(DataError):
    pass


class IdSetMismatch(DataError):
    pass
