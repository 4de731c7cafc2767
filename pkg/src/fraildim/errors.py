"""Exception types shared across the pipeline."""


class FraildimError(Exception):
    """Base class for all pipeline errors."""


class InputError(FraildimError):
    """Bad user-supplied input: files, schemas, or configuration."""


class ParseError(InputError):
    """A file could not be parsed in its declared format."""


class SchemaError(InputError):
    """Parsed content violates the catalog or cohort schema."""


class MissingColumnError(InputError):
    """The cohort CSV header lacks required columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("missing required column(s): " + ", ".join(self.columns))


class SynthSpecError(InputError):
    """Synthetic cohort specification violates its invariants."""


class DegenerateRecordError(FraildimError):
    """A participant has no assessed deficits at all."""


class DegenerateMarginError(FraildimError):
    """A binary variable is constant on the cases used, so phi is undefined."""


class InsufficientOverlapError(FraildimError):
    """A variable pair has too few pairwise-complete cases."""


class SingularMatrixError(FraildimError):
    """A correlation matrix is singular; smooth it or drop variables."""


class ConvergenceError(FraildimError):
    """An eigensolver or iterative routine failed to converge."""


class ConstantInputError(FraildimError):
    """A vector with zero variance was passed where variation is required."""


class RankDeficientError(FraildimError):
    """The regression design matrix has collinear columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("collinear design column(s): " + ", ".join(self.columns))


class InsufficientDataError(FraildimError):
    """Too few complete rows to fit the requested model."""


class CohortMismatchError(FraildimError):
    """Two model fits do not share the same outcome and cohort."""
