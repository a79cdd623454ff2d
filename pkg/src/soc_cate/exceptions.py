"""Exception hierarchy.

Data problems (bad rows, failed joins) derive from :class:`DataError`;
estimation problems (no overlap, no contrast) derive from
:class:`EstimationError`. The CLI maps the two families to distinct exit
codes.
"""


class SocCateError(Exception):
    """Base class for every error raised by this package."""


class DataError(SocCateError):
    """Input data violates a documented schema or invariant."""


class EstimationError(SocCateError):
    """Estimation cannot proceed on otherwise well-formed data."""


class MalformedRowError(DataError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}: line {line}: {message}")


class DuplicateKeyError(DataError):
    def __init__(self, path, line, key):
        self.path = str(path)
        self.line = line
        self.key = key
        super().__init__(f"{self.path}: line {line}: duplicate key {key!r}")


class MissingColumnError(DataError):
    def __init__(self, path, columns):
        self.path = str(path)
        self.columns = tuple(columns)
        super().__init__(f"{self.path}: missing column(s): {', '.join(self.columns)}")


class MissingClimateYearError(DataError):
    def __init__(self, field_id, year):
        self.field_id = field_id
        self.year = year
        super().__init__(f"field {field_id!r} has no climate record for {year}")


class EmptyResultError(DataError):
    """No analysis units survived assembly."""


class UnknownCropError(DataError):
    def __init__(self, crop_code, vocabulary):
        self.crop_code = crop_code
        super().__init__(f"crop {crop_code!r} not in vocabulary {list(vocabulary)}")


class EmptyMatrixError(DataError):
    """A matrix with zero rows was passed where at least one is needed."""


class DimensionMismatchError(DataError, ValueError):
    """Column count differs from what a fitted object expects."""


class InvalidConfigError(DataError, ValueError):
    """A configuration value is out of its documented domain."""


class InvalidGeometryError(DataError):
    """A geometry is not a usable RFC 7946 polygon."""


class InvalidModifierError(DataError, ValueError):
    """An effect-modifier vector is not a valid one-hot of the right length."""


class DegenerateInputError(EstimationError):
    """A learner was asked to fit zero samples."""


class SingleClassError(EstimationError):
    """Binary labels contain one class only, so there is no overlap."""


class TooFewUnitsError(EstimationError):
    """Fewer units than cross-fitting folds."""


class SingularSystemError(EstimationError):
    """Normal equations are singular (unpenalized and rank deficient)."""


class NoVariationError(EstimationError):
    def __init__(self, segment):
        self.segment = segment
        super().__init__(
            f"no treatment-residual variation in segment {segment!r}; "
            "no treated/control contrast to estimate from"
        )
