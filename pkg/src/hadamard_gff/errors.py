"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`HadamardGFFError`; parameter problems additionally derive from
``ValueError`` so callers can catch them generically.
"""


class HadamardGFFError(Exception):
    """Base class for all library errors."""


class InvalidParameter(HadamardGFFError, ValueError):
    pass


class EmptyDomain(HadamardGFFError, ValueError):
    pass


class GridMismatch(HadamardGFFError, ValueError):
    pass


class MaskMismatch(HadamardGFFError, ValueError):
    pass


class OutsideDomain(HadamardGFFError, ValueError):
    pass


class OnSkeleton(HadamardGFFError, ValueError):
    pass


class ResolutionTooCoarse(HadamardGFFError, ValueError):
    pass


class TNotOnGrid(HadamardGFFError, ValueError):
    pass


class TOrder(HadamardGFFError, ValueError):
    pass


class SupportNotOnSkeleton(HadamardGFFError, ValueError):
    pass


class SolverFailure(HadamardGFFError, RuntimeError):
    pass


class ConvergenceFailure(HadamardGFFError, RuntimeError):
    pass


class IncompleteSpectrum(HadamardGFFError, ValueError):
    pass


class IndefiniteIncrement(HadamardGFFError, RuntimeError):
    """A Green-function increment had a clearly negative eigenvalue."""


class ResourceLimit(HadamardGFFError, MemoryError):
    pass


class EmptyAccumulator(HadamardGFFError, ValueError):
    pass


class DegenerateProbe(HadamardGFFError, ValueError):
    pass


class ConfigError(HadamardGFFError, ValueError):
    pass
