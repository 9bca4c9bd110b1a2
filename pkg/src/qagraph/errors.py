"""Exception hierarchy; the CLI maps each family to an exit code."""


class QaGraphError(Exception):
    """Base class for library errors."""


class ConfigError(QaGraphError, ValueError):
    """Invalid configuration or command-line usage."""


class DatasetError(QaGraphError, ValueError):
    """Malformed or invalid input data (datasets, score tables)."""


class ScoreTableError(DatasetError):
    """Invalid score table contents."""


class MissingScoreError(QaGraphError, LookupError):
    """A score lookup hit a pair absent from its table under policy ``error``."""
