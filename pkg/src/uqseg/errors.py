"""Exception hierarchy for the toolkit.

Every error raised by this package derives from :class:`UqsegError`, split
into three broad families that the CLI maps onto exit codes: input/validation
problems, I/O problems, and statistical failures.
"""


class UqsegError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(UqsegError):
    """Malformed inputs, incompatible metadata, or out-of-range arguments."""


class MetaMismatch(ValidationError):
    """Volumes disagree on dims, spacing, or channel count."""


class EmptyEnsemble(ValidationError):
    """An operation over ensemble predictions received none."""


class SingleSample(ValidationError):
    """Sample variance is undefined for a single prediction."""


class InfeasibleConfig(ValidationError):
    """No assignment can satisfy the partition constraints."""


class CaseOutOfRange(ValidationError):
    """Case index outside the plan's range."""


class NoForegroundChannels(ValidationError):
    """A foreground reduction needs at least one non-background channel."""


class OrganIndexOutOfRange(ValidationError):
    """Consensus labels refer to organs beyond the organ set."""


class TooFewSamples(ValidationError):
    """Gaussian fitting needs at least two score vectors."""


class DimensionMismatch(ValidationError):
    """Score vector length differs from the model's organ count."""


class NonFiniteScore(ValidationError):
    """Score vectors must be finite."""


class MissingHoldoutPredictions(ValidationError):
    """A training case lacks predictions for one of its holdout learners."""


class OneClassOnly(ValidationError):
    """ROC-style metrics need both an ID and an OOD sample."""


class LevelOutOfRange(ValidationError):
    """Significance level must lie strictly between 0 and 1."""


class ConfigInvalid(ValidationError):
    """Phantom or run configuration violates its constraints."""


class IoFailure(UqsegError):
    """Reading or writing an artifact failed."""


class UqvFormatError(IoFailure):
    """A volume file is not valid UQV1 (bad magic, version, or payload)."""


class MissingPlan(IoFailure):
    """Cohort directory lacks the partition plan file."""


class MissingManifest(IoFailure):
    """Cohort directory lacks an expected case manifest."""


class StatisticalError(UqsegError):
    """A statistical computation could not be completed."""


class SingularCovariance(StatisticalError):
    """Covariance stayed non-positive-definite after maximal ridging."""
