"""Exception types shared across the package."""


class PoladsError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecord(PoladsError):
    """An ad record is not valid JSON or misses required fields."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BadVoteCount(MalformedRecord):
    """Vote fields are negative or not integers."""


class MalformedTargets(PoladsError):
    """The targeting payload of a record could not be parsed."""


class EmptyDataset(PoladsError):
    """An operation that needs records received none."""


class EmptyTrainingSet(PoladsError):
    """Encoder or model fitting received an empty training sequence."""


class EmptyCorpus(PoladsError):
    """Vectorizer fitting received no documents."""


class EmptyVocabulary(PoladsError):
    """No term survived the document-frequency floor."""


class SingleClassTraining(PoladsError):
    """Training data contains only one of the two classes."""


class NegativeFeature(PoladsError):
    """A feature matrix expected to be nonnegative has negative entries."""


class DimensionMismatch(PoladsError):
    """Input vector width does not match the fitted model."""


class LengthMismatch(PoladsError):
    """Paired sequences have different lengths."""


class InsufficientGroups(PoladsError):
    """Too few advertisers for the requested split or fold count."""


class MissingCover(PoladsError):
    """A tree lacks the per-node sample counts SHAP attribution needs."""


class TooManyFeatures(PoladsError):
    """Brute-force Shapley enumeration capped at 20 features."""


class EmptyMatrix(PoladsError):
    """An attribution matrix with no rows or columns was given."""


class IncompatibleBundles(PoladsError):
    """Two model bundles cannot be compared (different feature configs)."""


class UnsupportedModel(PoladsError):
    """The command does not apply to this model type."""


class BootstrapError(PoladsError):
    """Training failed inside a bootstrap iteration."""

    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {cause}")


class DegenerateDataWarning(UserWarning):
    """No usable split was found on the first boosting round."""
