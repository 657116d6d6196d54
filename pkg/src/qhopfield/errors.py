"""Exception types raised across the package."""


class QHopfieldError(Exception):
    """Base class for solver and integration failures."""


class NonFiniteIntegrandError(QHopfieldError, ValueError):
    def __init__(self, node, value):
        super().__init__(f"integrand is not finite at t={node!r} (value {value!r})")
        self.node = node
        self.value = value


class DivergenceError(QHopfieldError):
    def __init__(self, time, message="state became non-finite"):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class NoFixedPointError(QHopfieldError):
    def __init__(self, residual, iterations):
        super().__init__(
            f"Newton iteration did not converge in {iterations} steps "
            f"(last residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


class MaximizationError(QHopfieldError):
    def __init__(self, lo, hi, t):
        super().__init__(f"maximum of Y(h, t={t:.6g}) sits on the bracket edge [{lo:.6g}, {hi:.6g}]")
        self.bracket = (lo, hi)
        self.t = t


class NoSaddleError(QHopfieldError):
    """The saddle-point system has no solution at the requested parameters."""

    def __init__(self, message, params=None, iterations=0):
        super().__init__(message)
        self.params = params
        self.iterations = iterations


class IntegrationError(QHopfieldError):
    def __init__(self, time, violation, what):
        super().__init__(f"{what} violated by {violation:.3e} at t={time:.6g}")
        self.time = time
        self.violation = violation
        self.what = what


class SizeError(QHopfieldError, ValueError):
    pass
