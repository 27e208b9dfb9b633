"""Exception hierarchy shared across the package.

Every error raised by public entry points derives from :class:`KacgmError`
so callers (CLI, HTTP server) can map failures to machine-readable codes.
"""


class KacgmError(Exception):
    """Base class for all package errors."""

    code = "error"


class ShapeError(KacgmError):
    """Array arguments have inconsistent or unsupported shapes."""

    code = "shape"


class InputDomainError(KacgmError):
    """Numeric input is outside the domain an operation accepts."""

    code = "domain"


class ConfigError(KacgmError):
    """A configuration object or file is invalid."""

    code = "config"


class GraphError(KacgmError):
    """Graph construction failed (bad names, dangling edges...)."""

    code = "graph"


class CyclicGraphError(GraphError):
    """The directed graph contains a cycle; message names one."""

    code = "cycle"


class DegenerateDataError(KacgmError):
    """Data cannot support the requested fit (e.g. constant column)."""

    code = "degenerate-data"


class DivergenceError(KacgmError):
    """Training produced a non-finite loss; message names the epoch."""

    code = "divergence"


class IdentifiabilityError(KacgmError):
    """A counterfactual query is not point-identified.

    ``offenders`` lists the discrete descendants blocking identification.
    """

    code = "identifiability"

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = tuple(offenders)


class UnsupportedDecompositionError(KacgmError):
    """A per-parent decomposition was requested for a non-additive model."""

    code = "unsupported-decomposition"


class ParseError(KacgmError):
    """A file could not be parsed; carries row/column coordinates if known."""

    code = "parse"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ModelFileError(KacgmError):
    """A model file is malformed or has an unsupported version."""

    code = "model-file"


class SymbolicFitError(KacgmError):
    """Symbolic atom fitting cannot proceed (e.g. degenerate samples)."""

    code = "symbolic-fit"
