"""Exception types shared across the package."""


class DronenetError(Exception):
    """Base class for all package errors."""


class InvalidParam(DronenetError, ValueError):
    pass


class InvalidCoordinate(DronenetError, ValueError):
    pass


class UncoverableDemand(DronenetError):
    def __init__(self, demand):
        super().__init__(f"demand {demand!r} has no candidate base within the catchment radius")
        self.demand = demand


class EmptyBase(DronenetError):
    pass


class UnstableQueue(DronenetError):
    def __init__(self, rho, K):
        super().__init__(f"offered load {rho:.6g} is not below capacity {K}")
        self.rho = rho
        self.K = K


class InvalidCapacity(DronenetError, ValueError):
    pass


class DegenerateBound(DronenetError, ValueError):
    pass


class ComplexityWarning(UserWarning):
    pass


class NonIntegral(DronenetError):
    pass


class RowInfeasible(DronenetError):
    pass


class Infeasible(DronenetError):
    pass


class Unbounded(DronenetError):
    pass


class OracleFailure(DronenetError):
    """The incumbent's linear objective disagrees with the queueing evaluator."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoFractionalVar(DronenetError):
    pass


class BudgetExceeded(DronenetError):
    pass


class NoFeasibleDesign(DronenetError):
    pass


class UncoveredDemand(DronenetError):
    def __init__(self, demands):
        super().__init__(f"no open base covers demands {list(demands)}")
        self.demands = list(demands)


class ConfigError(DronenetError):
    pass


class DataError(DronenetError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
