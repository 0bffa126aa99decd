"""
Exceptions raised across SSimplode.

Every error belongs to one of three classes that the CLI maps onto exit codes:
validation (bad input, parameters outside their domain), convergence (a solver,
a fit or a search did not produce a trustworthy answer) and verification.
"""
from typing import Optional



class SSimplodeError(Exception):
    pass


class ValidationError(SSimplodeError):
    pass


class ConvergenceError(SSimplodeError):
    pass


class VerificationError(SSimplodeError):
    pass



##### validation #####

class DomainError(ValidationError):
    pass

class ConfigError(ValidationError):
    pass

class DegenerateSonicPoint(ValidationError):
    """The sonic quadratic has no two distinct real roots"""
    pass

class IntegerNuError(ValidationError):
    def __init__(self, nu, guard):
        super().__init__(f'nu = {nu} is within {guard} of an integer')
        self.nu = nu
        self.guard = guard

class IntegerExponent(ValidationError):
    def __init__(self, Omega, exponent, guard):
        super().__init__(f'Omega = {Omega}: exponent {exponent} is within {guard} of an integer')
        self.Omega = Omega
        self.exponent = exponent

class NonDecayingTail(ValidationError):
    pass

class InvalidArtifact(ValidationError):
    """A stored result that fails its schema or its invariants"""
    pass

class UnsupportedFileType(ValidationError):
    def __init__(self, path: str, mime: str):
        super().__init__(f'{path}: unsupported file type {mime}')
        self.path = path
        self.mime = mime



##### convergence #####

class RecursionBreakdown(ConvergenceError):
    def __init__(self, index: int, where: str = ''):
        super().__init__(f'recursion denominator vanishes at order {index}' + (f' ({where})' if where else ''))
        self.index = index

class NewtonDiverged(ConvergenceError):
    def __init__(self, message: str, residual: Optional[float] = None, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

class SingularJacobian(ConvergenceError):
    pass

class SonicCrossing(ConvergenceError):
    """The trajectory pierced the sonic line away from P2"""
    def __init__(self, message: str, Z: Optional[float] = None):
        super().__init__(message)
        self.Z = Z

class WindowExit(ConvergenceError):
    def __init__(self, message: str, last_good=None):
        super().__init__(message)
        self.last_good = last_good

class IllConditionedFit(ConvergenceError):
    def __init__(self, condition_number: float, bound: float):
        super().__init__(f'fit condition number {condition_number:.3e} exceeds {bound:.1e}')
        self.condition_number = condition_number

class PrecisionExhausted(ConvergenceError):
    pass

class NoSignChange(ConvergenceError):
    pass

class InsufficientData(ConvergenceError):
    pass

class PositivityLoss(ConvergenceError):
    def __init__(self, message: str, Z: Optional[float] = None):
        super().__init__(message)
        self.Z = Z

class FitFailed(ConvergenceError):
    pass

class MissingGaugeMode(ConvergenceError):
    """The largest smooth-mode exponent is not the gauge value Ω = r"""
    def __init__(self, message: str, Omega=None):
        super().__init__(message)
        self.Omega = Omega
