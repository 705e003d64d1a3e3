"""Exception types raised across the package."""


class BaiError(Exception):
    """Base class for all package errors."""


class InfeasibleTarget(BaiError, ValueError):
    """Target mean x violates f(|x|) < B."""


class BadSide(BaiError, ValueError):
    """Target mean is on the wrong side of the distribution's mean."""


class BadSupport(BaiError, ValueError):
    """An atom lies outside the declared bounded support."""


class NotConverged(BaiError, RuntimeError):
    """A solver returned a point that fails its optimality checks."""


class OutOfRange(BaiError, ValueError):
    """Cache evaluation outside the tabulated interval."""


class DegenerateGap(BaiError, ValueError):
    """Two arms that must be separated share the same mean."""


class NoGap(DegenerateGap):
    """All arm means coincide."""


class TargetAboveRange(BaiError, ValueError):
    """Requested level is at or beyond the attainable supremum."""


class TooLarge(BaiError, ValueError):
    """Brute-force problem exceeds its size guard."""


class BatchTooSmall(BaiError, ValueError):
    """Batch size below (K+1)^2."""


class Diverged(BaiError, RuntimeError):
    """Fixed-point iteration did not settle."""


class GammaTooSmall(BaiError, ValueError):
    """Deviation level must exceed K+1."""


class Underdetermined(BaiError, ValueError):
    """Not enough distinct abscissae to fit a line."""


class DomainError(BaiError, ValueError):
    """Argument outside the domain of a formula."""


class DegenerateCost(BaiError, ValueError):
    """Cost model has no sampling or per-sample cost."""


class NoTailMass(BaiError, ValueError):
    """Distribution has no mass above the cut point."""


class ConfigError(BaiError, ValueError):
    """Invalid experiment configuration."""
