"""Exception types shared across the package."""


class FiberdimError(Exception):
    """Base class for all package-specific failures."""


class InvalidWord(FiberdimError, ValueError):
    """A symbolic word violates the alphabet contract (digits >= 1, etc.)."""


class DomainError(FiberdimError, ValueError):
    """Argument of a base map lies outside [0, 1)."""


class RationalTermination(FiberdimError):
    """Digit extraction hit a (numerically) rational point.

    Carries the digits recovered before termination in ``digits``.
    """

    def __init__(self, digits, message="continued fraction terminated"):
        self.digits = tuple(digits)
        super().__init__(f"{message} after {len(self.digits)} digit(s)")


class EnumerationCapExceeded(FiberdimError):
    """A word enumeration would produce more items than the configured cap."""


class DomainEscape(FiberdimError):
    """A fiber map sent a point outside the fiber domain beyond tolerance."""


class SummabilityFailure(FiberdimError):
    """A cylinder sum grew beyond the configured cap (non-summable regime)."""


class NonPrimitive(FiberdimError):
    """Transition structure of a weighted chain is not primitive."""


class BracketFailure(FiberdimError):
    """Root bracketing for the pressure zero failed on [0, s_max]."""


class DegenerateExponent(FiberdimError, ValueError):
    """A contraction exponent needed as a denominator is not positive."""


class InsufficientScales(FiberdimError):
    """Too few usable scales survive the population threshold for a slope fit."""


class ConfigError(FiberdimError, ValueError):
    """Run configuration is structurally valid JSON but semantically wrong."""
