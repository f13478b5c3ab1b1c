"""Exception types shared across the solver modules."""


class Infeasible(Exception):
    """No allocation satisfies the rate floors.

    Parameters
    ----------
    stage : str
        Pipeline stage that detected the problem (``"allocation"``,
        ``"finalize"``, ``"oracle"``, ...).
    reason : str
        Human readable explanation.
    """

    def __init__(self, stage, reason):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


class NoPositiveRoot(ValueError):
    """A boundary stationary point does not exist in the admissible range."""


class ConvergenceError(RuntimeError):
    """The beam solver failed to reach the requested tolerance.

    The best iterate and its constraint residuals are kept so callers can
    inspect or fall back on them.
    """

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals
