"""Exception types shared across the package."""


class GraphonError(Exception):
    """Base class for all errors raised by graphon_ldp."""


class ValidationError(GraphonError, ValueError):
    """Input data does not describe a valid object."""


class EtaViolation(ValidationError):
    def __init__(self, i, j, value, eta):
        self.i, self.j, self.value, self.eta = i, j, value, eta
        super().__init__(
            f"entry ({i}, {j}) = {value!r} lies outside [eta, 1 - eta] with eta = {eta!r}"
        )


class AsymmetryError(ValidationError):
    def __init__(self, max_asymmetry):
        self.max_asymmetry = max_asymmetry
        super().__init__(f"matrix is not symmetric (max |A - A^T| = {max_asymmetry:.3e})")


class RangeError(ValidationError):
    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"entry ({i}, {j}) = {value!r} lies outside [0, 1]")


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ResolutionMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class TooLargeForExact(ValidationError):
    pass


class EmptyMask(ValidationError):
    pass


class RegimeUnavailable(ValidationError):
    def __init__(self, regime, reason):
        self.regime = regime
        super().__init__(f"regime {regime!r} unavailable: {reason}")


class NumericalError(GraphonError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class NoConvergence(NumericalError):
    def __init__(self, max_iter, last_residual, message=None):
        self.max_iter = max_iter
        self.last_residual = last_residual
        super().__init__(
            message
            or f"no convergence after {max_iter} iterations (last residual {last_residual:.3e})"
        )


class DegenerateEigenvalue(NumericalError):
    def __init__(self, gap):
        self.gap = gap
        super().__init__(f"leading eigenvalue is not simple (gap {gap:.3e})")


class HypothesisViolated(NumericalError):
    pass


class TailNotNegligible(NumericalError):
    def __init__(self, ratio):
        self.ratio = ratio
        super().__init__(f"perturbation too large for the series: ||g||_2 / mu = {ratio:.3f} >= 0.9")


class NotConverged(NumericalError):
    """Optimizer stopped without meeting its tolerances; ``result`` holds the best iterate."""

    def __init__(self, result, message=None):
        self.result = result
        super().__init__(
            message
            or f"optimizer did not converge (kkt residual {result.kkt_residual:.3e}, "
            f"beta achieved {result.beta_achieved:.12g})"
        )


class GershgorinWarning(UserWarning):
    """Off-diagonal mass of the finite-rank matrix is not small relative to its diagonal gaps."""
