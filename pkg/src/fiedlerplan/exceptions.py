"""Exception types raised by the planner."""


class InvalidArgumentError(ValueError):
    """An input violates the documented preconditions."""


class DegenerateGeometryError(ValueError):
    """Two robots are (nearly) coincident, so no direction is defined."""


class NoFeasibleAssignmentError(ValueError):
    """The assignment problem has no finite-cost matching."""
