"""Exception types raised by the estimation and simulation code."""


class JbDetectError(Exception):
    """Base class for all package errors."""


class NonPositiveDiffusion(JbDetectError, ValueError):
    """Squared diffusion coefficient A(x)^T alpha was not strictly positive."""

    def __init__(self, x, alpha, index=None):
        self.x = float(x)
        self.alpha = [float(a) for a in alpha]
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(
            f"non-positive squared diffusion{where}: x={self.x!r}, alpha={self.alpha!r}"
        )


class SimulationDiverged(JbDetectError, ArithmeticError):
    def __init__(self, step, replication=None):
        self.step = step
        self.replication = replication
        rep = f" (replication {replication})" if replication is not None else ""
        super().__init__(f"non-finite state at fine step {step}{rep}")


class DegenerateVariance(JbDetectError, ArithmeticError):
    """Residual variance over the retained set vanished."""


class SingularNormalMatrix(JbDetectError, ArithmeticError):
    """A normal/scoring matrix could not be inverted reliably."""


class NonUniformGrid(JbDetectError, ValueError):
    pass


class MalformedRow(JbDetectError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")
