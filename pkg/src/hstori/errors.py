"""Exception hierarchy shared by the geometry, spectral and solver modules."""


class HstoriError(Exception):
    """Base class for all package errors."""


class UnsupportedOrderError(HstoriError, ValueError):
    """Requested jet order exceeds what the polynomial machinery provides."""


class RealityError(HstoriError, ValueError):
    """A potential fails the conjugate-symmetry (reality) condition."""


class NormalFormError(HstoriError, ValueError):
    """A potential flagged as normal form has perturbation terms of degree < 4."""


class InvalidMotionError(HstoriError, ValueError):
    """The matrix passed as a unitary motion is not unitary."""


class DegenerateMetricError(HstoriError, ArithmeticError):
    """A Hermitian or induced metric failed to be positive definite."""


class ImmersionError(HstoriError, ArithmeticError):
    """The deformed torus stopped being an immersion (|1 + X^k| too small)."""


class TotallyRealError(HstoriError, ArithmeticError):
    """Tangent planes are numerically not totally real."""


class InconsistentRHSError(HstoriError, ArithmeticError):
    """Right-hand side handed to the flat inverse is not in its range."""


class SolverDivergedError(HstoriError, RuntimeError):
    """Projected nonlinear solve failed to reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SolverAbortedError(HstoriError, RuntimeError):
    """Projected solve stopped because an iterate left the admissible set."""


class DegenerateRadiiError(HstoriError, ArithmeticError):
    """Cokernel Gram matrix is too ill-conditioned to separate components."""


class DegenerateCriticalPointError(HstoriError, ArithmeticError):
    """The frame functional has a degenerate critical point (singular Hessian/Jacobian)."""


class NoFrameFoundError(HstoriError, RuntimeError):
    """Newton search on the cokernel map failed to converge."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class CertificateError(HstoriError, RuntimeError):
    """Final stationarity certificate failed; carries the residual breakdown."""

    def __init__(self, message, breakdown=None):
        super().__init__(message)
        self.breakdown = breakdown or {}


class InvalidSpecError(HstoriError, ValueError):
    """Hopf torus specification violates its constraints."""


class ConfigError(HstoriError, ValueError):
    """Run configuration failed validation."""
