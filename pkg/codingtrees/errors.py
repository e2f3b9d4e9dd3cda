"""Exception hierarchy.

Every error derives from ``ValueError`` so callers that only know about bad input keep working.
``BudgetExhausted`` is the one outcome that means "inconclusive" rather than "wrong".
"""


class CodingTreesError(ValueError):
    """Base class for all library errors."""


class LanguageMismatchError(CodingTreesError):
    """Two structures (or a structure and a class) are over different languages."""


class ScopeError(CodingTreesError):
    """The requested operation does not cover this class or structure."""


class DepthError(CodingTreesError):
    """A level, length or vertex index lies outside what has been built."""


class PreconditionError(CodingTreesError):
    """Arguments are well formed but violate an operation precondition."""


class SpecParseError(CodingTreesError):
    """A class spec string or structure file could not be parsed."""


class BudgetExhausted(CodingTreesError):
    """A bounded search ran out of budget before reaching an answer."""

    def __init__(self, message: str, explored: int = 0):
        super().__init__(message)
        self.explored = explored
