"""Exception types shared across the package."""


class PathPriorError(Exception):
    """Base class for all errors raised by this package."""


class CycleWouldForm(PathPriorError):
    """An edge edit (or graph construction) would create a directed cycle."""


class NodeSetMismatch(PathPriorError):
    """Two graphs that must share a node set do not."""


class UnknownNode(PathPriorError):
    """A node index or name is not part of the graph at hand."""


class TooLarge(PathPriorError):
    """Exhaustive enumeration was requested beyond the supported size."""


class InsufficientNodes(PathPriorError):
    """The node count cannot accommodate the requested construction."""


class PartTooLarge(PathPriorError):
    """A partition part exceeds the dense-table variable cap.

    Joint tables are dense over 4**k entries; beyond the cap the memory cost
    is prohibitive and the belief set should be split instead.
    """


class SupportMismatch(PathPriorError):
    """KL divergence is undefined: p places mass where q is zero."""


class NotConverged(PathPriorError):
    """An iterative fit exhausted its budget without meeting tolerance."""

    def __init__(self, message: str, deviation: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.deviation = deviation
        self.iterations = iterations


class ArityMismatch(PathPriorError):
    """Dataset arities are incompatible with the model being scored."""


class ParseError(PathPriorError):
    """A text input is malformed; carries position info when available."""

    def __init__(self, message: str, line: int | None = None,
                 column: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class BadDimensions(PathPriorError):
    """A table's shape does not match the declared arities/parents."""


class RowNotNormalized(PathPriorError):
    """A conditional probability row does not sum to one."""


class RaggedRow(PathPriorError):
    """A dataset row has the wrong number of cells."""


class NonInteger(PathPriorError):
    """A dataset cell is not an integer state index."""


class ValueOutOfRange(PathPriorError):
    """A dataset cell exceeds the declared arity of its column."""


class TooManyNodesRequested(PathPriorError):
    """Belief generation asked for more component nodes than the graph has."""
