"""Exception types shared across the package."""


class CsmaOptError(Exception):
    """Base class for all csmaopt errors."""


class NoConvergence(CsmaOptError):
    """An iterative solver exhausted its iteration budget."""


class NoBracket(CsmaOptError):
    """Root finding needed a sign-change bracket and none was available."""


class Divergence(CsmaOptError):
    """A quadrature estimate failed to stabilise under subdivision."""


class InvalidAlpha(CsmaOptError):
    """Path-loss exponent outside the domain of the requested formula."""


class UnsupportedAlpha(CsmaOptError):
    """Operation only defined for path-loss exponent 4."""


class DegenerateDenominator(CsmaOptError):
    """The access-probability recursion denominator vanished."""


class ThresholdAbovePower(CsmaOptError):
    """Carrier-sense threshold at or above the transmit power."""


class InsufficientNodes(CsmaOptError):
    """Too few nodes expected in the simulation region."""


class InsufficientRetained(CsmaOptError):
    """Too few retained transmitters to form an estimate."""
