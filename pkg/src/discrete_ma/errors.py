"""Exception types raised across the package."""


class DiscreteMAError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInterior(DiscreteMAError):
    """The lattice has no point strictly inside the domain (h too coarse)."""


class NonFiniteValue(DiscreteMAError):
    pass


class MissingNode(DiscreteMAError):
    """A stencil endpoint is not a node of the discretization."""


class DegenerateLine(DiscreteMAError):
    pass


class DegenerateInput(DiscreteMAError):
    """Node set is affinely dependent; no full-dimensional hull exists."""


class OutsideHull(DiscreteMAError):
    pass


class UnboundedEnvelope(DiscreteMAError):
    pass


class EquivalenceViolation(DiscreteMAError):
    def __init__(self, pair, message=""):
        self.pair = pair
        super().__init__(message or f"cells disagree at node {pair.node}: hausdorff={pair.hausdorff:.3e}")


class QuadratureNotConverged(DiscreteMAError):
    pass


class BoundaryNotNonnegative(DiscreteMAError):
    pass


class SingularSystem(DiscreteMAError):
    pass


class HypothesisViolated(DiscreteMAError):
    def __init__(self, message, nodes=()):
        self.nodes = list(nodes)
        super().__init__(message)


class DomainError(DiscreteMAError, ValueError):
    pass


class NotDiscreteConvex(DiscreteMAError):
    pass


class ConfigError(DiscreteMAError, ValueError):
    pass
