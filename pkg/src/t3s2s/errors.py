"""Exception hierarchy.

Every error raised by the library derives from :class:`T3S2SError`; the CLI
maps the three families below onto its exit codes.
"""


class T3S2SError(Exception):
    """Base class for all library errors."""


class ConfigError(T3S2SError):
    """Invalid input or configuration (CLI exit code 1)."""


class IOFailure(T3S2SError):
    """File could not be read or written (CLI exit code 2)."""


class NumericError(T3S2SError):
    """A non-finite value was produced or supplied (CLI exit code 3)."""


# prompt pipeline
class TooManyTokens(ConfigError):
    pass


class KeywordNotFound(ConfigError):
    pass


class AmbiguousKeyword(ConfigError):
    pass


class MissingEmbedding(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class ZeroEnergyKeyword(NumericError):
    pass


class NonFiniteEmbedding(NumericError):
    pass


# sketches
class ParseError(ConfigError):
    pass


class LabelOutOfRange(ConfigError):
    pass


class UnknownInstance(ConfigError):
    pass


class BadTarget(ConfigError):
    pass


# attention
class MaskLengthMismatch(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class NonFiniteInput(NumericError):
    pass
