"""Exception taxonomy shared across the pipeline.

Every error raised on purpose by this package derives from SentiPipeError,
so callers (including the CLI) can map failure classes to behavior without
string matching. Plain OSError is left alone: file system problems are
reported by the standard library better than a wrapper would.
"""


class SentiPipeError(Exception):
    """Base class for all deliberate pipeline errors."""


class SchemaError(SentiPipeError):
    """A file or payload does not have the expected structure."""


class ValidationError(SentiPipeError):
    """Structurally well-formed data violates a semantic invariant."""


class UnknownAuName(SentiPipeError):
    """An AU name outside the canonical twenty-name set."""


class UnknownAdId(SentiPipeError):
    """A video references an ad that is not in the annotation map."""


class ConfigError(SentiPipeError):
    """A configuration value or override is invalid."""


class DegenerateTrainingSet(SentiPipeError):
    """The training examples do not contain both classes."""


class NoPredictions(SentiPipeError):
    """No participant contributed a single scored frame to an ad."""


class EmptyInterval(SentiPipeError):
    """An interval does not overlap the curve domain."""


class EmptyScoreList(SentiPipeError):
    """ROC-AUC needs at least one positive and one negative score."""


class InsufficientAds(SentiPipeError):
    """A KPI needs at least one ad of each class."""


class NoMoments(SentiPipeError):
    """An ad that should carry labeled moments has none."""


class DegenerateComplement(SentiPipeError):
    """Labeled moments cover the whole ad; no negative region remains."""
