"""
Exception hierarchy shared by the library and the command-line front end
"""
from typing import Any, Dict, Optional


class SingleBirthError(Exception):
    """Base class of every error raised by birthchain"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error object printed by the CLI"""
        payload: Dict[str, Any] = {'error': type(self).__name__, 'message': self.message}
        payload.update({k: v for k, v in self.details.items() if v is not None})
        return payload


class UsageError(SingleBirthError):
    exit_code = 2


class ConfigError(UsageError):
    pass


class ModelError(SingleBirthError):
    exit_code = 3


class StructureError(ModelError):
    """Rate row violating the single birth shape"""


class DomainError(ModelError):
    """Parameter outside its admissible range"""


class SpecError(ModelError):
    """Malformed model specification document"""


class NumericError(SingleBirthError):
    exit_code = 4


class HorizonExceeded(NumericError):
    def __init__(self, requested: int, horizon: int):
        super().__init__(f"state {requested} lies beyond the model horizon {horizon}",
                         requested=requested, horizon=horizon)


class NumericOverflow(NumericError):
    pass


class DegenerateBoundary(NumericError):
    pass


class InconclusiveSeries(NumericError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message, diagnostics=diagnostics)
        self.diagnostics = diagnostics or {}


class PreviousOrderInfinite(NumericError):
    def __init__(self, order: int):
        super().__init__(f"moment of order {order} is infinite", order=order)
        self.order = order


class NotExplosive(NumericError):
    pass


class RateBoundViolated(NumericError):
    def __init__(self, lam: float, state: int, rate: float):
        super().__init__(f"lambda={lam} is not below q_{state}={rate}",
                         lam=lam, state=state, rate=rate)
        self.state = state


class ConditionViolated(NumericError):
    def __init__(self, index: int, message: str = ''):
        super().__init__(message or f"positivity side condition fails at n={index}", index=index)
        self.index = index


class FeasibilityViolated(NumericError):
    def __init__(self, index: int, value: float):
        super().__init__(f"lambda * partial sum reaches {value} >= 1 at n={index}",
                         index=index, value=value)
        self.index = index


class PreconditionViolated(NumericError):
    pass


class AllCapped(NumericError):
    def __init__(self, samples: int):
        super().__init__(f"all {samples} trajectories hit a cap", samples=samples)
