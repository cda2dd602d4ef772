"""Exception hierarchy for the offloading optimizer."""


class OffloadError(Exception):
    """Base class for every error raised by this package."""


class InvalidInstance(OffloadError):
    """Raised when an instance violates one or more standing constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid instance")


class EmptyFleet(OffloadError):
    pass


class EmptySubset(OffloadError):
    pass


class NegativeRHS(OffloadError):
    pass


class PoleAtOne(OffloadError):
    pass


class MalformedPlan(OffloadError):
    pass


class DeadlineInfeasible(OffloadError):
    """Neither local execution nor offloading can meet the deadline."""


class DeadlineInfeasibleLocally(DeadlineInfeasible):
    """Even f_max on the whole task misses the deadline."""


class SubsetTooLarge(OffloadError):
    pass


class FleetTooLarge(OffloadError):
    pass
