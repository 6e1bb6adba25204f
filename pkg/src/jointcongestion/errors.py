"""Exception hierarchy shared by every module of the package."""


class DomainError(ValueError):
    """A delay function was evaluated outside ``0 <= x < capacity``."""


class PathPoleError(DomainError):
    """Rate on an access path reached or exceeded its capacity."""

    def __init__(self, i, j, rate, capacity):
        self.i, self.j = i, j
        self.rate, self.capacity = rate, capacity
        super().__init__(
            f"path ({i}, {j}) rate {rate!r} is not below capacity {capacity!r}"
        )


class NodePoleError(DomainError):
    """Aggregate load on a service node reached or exceeded its capacity."""

    def __init__(self, j, load, capacity):
        self.j = j
        self.load, self.capacity = load, capacity
        super().__init__(f"node {j} load {load!r} is not below capacity {capacity!r}")


class ValidationError(ValueError):
    """Problem data violates a structural invariant (sign, shape, ...)."""


class ParseError(ValueError):
    """An instance or routing file could not be parsed."""


class Infeasible(Exception):
    """No routing satisfies the constraints."""


class InfeasibleInstance(Infeasible):
    """Instance fails a necessary feasibility condition."""


class BestResponseInfeasible(Infeasible):
    """A source's path capacities cannot carry its offered rate."""


class UnstableRouting(ValueError):
    """Routing would make some queue unstable."""


class DimensionTooLarge(ValueError):
    """Brute-force search requested on too many free coordinates."""


class MaxItersExceeded(RuntimeError):
    """Centralized solver hit its iteration budget.

    ``routing`` and ``trace`` hold the best iterate found, ``residual`` the
    Wardrop spread at that point.
    """

    def __init__(self, routing, trace, residual):
        self.routing = routing
        self.trace = trace
        self.residual = residual
        super().__init__(
            f"centralized solver did not converge (residual {residual:.3e})"
        )


class NotConverged(RuntimeError):
    """Distributed iteration hit its iteration budget; ``result`` is kept."""

    def __init__(self, result):
        self.result = result
        super().__init__(
            f"distributed iteration did not converge after {result.iters} "
            f"iterations (residual {result.fixed_point_residual:.3e})"
        )
