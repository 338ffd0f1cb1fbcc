"""
Exception hierarchy shared by the tree-induction modules.
"""


class TreeError(Exception):
    """Base class for all errors raised by the engine."""


class DataQualityError(TreeError, ValueError):
    """Input data cannot be turned into a valid instance."""

    def __init__(self, message: str, column: str | None = None):
        self.column = column
        if column is not None:
            message = f"column '{column}': {message}"
        super().__init__(message)


class ZeroMassError(TreeError, ValueError):
    """Impurity requested for a histogram with no probability mass."""


class InvalidSplitError(TreeError, ValueError):
    """Children of a split carry more mass than their parent."""


class InseparableNodeError(TreeError):
    """Every remaining test is constant on the node."""

    def __init__(self, n_objects: int):
        self.n_objects = n_objects
        super().__init__(f"no test separates the {n_objects} objects of this node")


class CapViolationError(TreeError, ValueError):
    """Instance too large for an exhaustive oracle."""


class UnknownTagError(TreeError, ValueError):
    """Algorithm tag not recognised."""


class FormatVersionError(TreeError, ValueError):
    """Interchange file written by an incompatible format version."""
