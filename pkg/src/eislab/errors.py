"""Exception taxonomy shared by every eislab module.

Every failure mode that a caller is expected to handle programmatically gets
its own class; generic ValueError/TypeError remain for plain misuse.
"""


class EislabError(Exception):
    """Base class for all library-specific errors."""


class NotInvertible(EislabError):
    """An element or matrix required to be invertible is not."""


class NotAUnit(EislabError):
    """A ring element expected to be a unit is not (e.g. a derivative test)."""


class PrecisionExhausted(EislabError):
    """A p-adic computation hit the working modulus p^k before it could be
    certified; rerun with a larger precision."""


class NotIntegral(EislabError):
    """A value expected to be p-integral has p in a denominator."""


class OracleMismatch(EislabError):
    """Two independent algorithms for the same quantity disagreed."""


class SpanMismatch(EislabError):
    """A module/ideal span comparison that must hold did not."""


class NotStabilized(EislabError):
    """A quantity did not stabilize between a bound B and its control bound."""


class ZeroIndex(EislabError):
    """A quotient expected to be finite has free rank (infinite index)."""


class DivisibilityViolation(EislabError):
    """A proven divisibility of orders failed; indicates an implementation bug."""


class DepthExhausted(EislabError):
    """A truncated tree/graph computation needs more levels to stabilize."""
