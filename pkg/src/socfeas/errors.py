"""Exception types raised by the solver and its building blocks."""


class SocfeasError(Exception):
    """Base class for every error raised by this package."""


class NotInterior(SocfeasError):
    """A point that must lie strictly inside the cone does not."""


class ZeroBlock(SocfeasError):
    """A block column group of the data matrix is identically zero."""


class DegenerateStart(SocfeasError):
    """The starting point cannot be built because ``A e = 0``."""


class SingularNormalMatrix(SocfeasError):
    """``A H(x)^{-1} A^T`` is singular to working precision."""


class LengthMismatch(SocfeasError):
    """Vector operands have different lengths."""


class ShapeMismatch(SocfeasError):
    """Matrix operands are not conformable."""


class NegativeInput(SocfeasError):
    """A square root was requested of a negative number."""


class RankDeficient(SocfeasError):
    """Householder QR found a numerically zero pivot."""


class PrecisionTooCoarse(SocfeasError):
    """The unit roundoff is too large for the requested error bound."""


class StepRejected(SocfeasError):
    """A Newton step left the central neighborhood twice in a row."""


class Unbounded(SocfeasError):
    """The condition number is infinite (ill-posed data)."""


class ParseError(SocfeasError):
    """An instance or certificate file is malformed."""
