"""Exception hierarchy for the qdn package.

Every failure mode raised by the library derives from :class:`QdnError`,
so callers (notably the CLI) can distinguish user/model errors from
genuine bugs with a single except clause.
"""


class QdnError(Exception):
    """Base class for all qdn errors."""


class InvalidDetectorError(QdnError):
    """A detector index was not a positive integer."""


class InvalidLabelError(QdnError):
    """A labstate label was negative or outside its register."""


class DeclarationError(QdnError):
    """A stage, basis element or vector violated a structural invariant."""


class MissingBindingError(QdnError):
    """An expression referenced a parameter absent from the binding."""

    def __init__(self, parameter: str):
        super().__init__(f"parameter '{parameter}' is not bound")
        self.parameter = parameter


class ExpressionDomainError(QdnError):
    """An expression evaluated outside its numeric domain (sqrt of a negative)."""


class IncompleteMapError(QdnError):
    """A stage map has no rule for one of its source basis elements."""


class DimensionTheoremError(QdnError):
    """Rule set maps a source space into a strictly smaller target space.

    A norm-preserving linear map between finite Hilbert spaces exists only
    when the target dimension is at least the source dimension, so such a
    rule set can never be semi-unitary.
    """


class StageMismatchError(QdnError):
    """Adjacent maps in a composition do not share a stage boundary."""


class BasisMismatchError(QdnError):
    """A vector or matrix was applied across incompatible bases."""


class NormalizationError(QdnError):
    """An initial state was not normalized and no normalize flag was given."""

    def __init__(self, norm: float):
        super().__init__(f"initial state has norm {norm!r}, expected 1")
        self.norm = norm


class PortError(QdnError):
    """An optical module was wired with colliding or ill-typed ports."""


class UnknownScenarioError(QdnError):
    """build_scenario was asked for a name it does not know."""


class SweepCapError(QdnError):
    """A parameter sweep grid exceeds the configured size cap."""
