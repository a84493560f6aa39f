from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

#: threshold value meaning "wait until the current computation finishes"
WAIT_FOR_COMPLETION = math.inf


class ConvergenceError(RuntimeError):
    """An iterative optimizer hit its iteration cap.

    The partial result (with its trace) is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnreachableDeliveryError(ArithmeticError):
    """Success probability is zero, so the peak-age ratio is undefined."""


@dataclass(frozen=True)
class DinkelbachStep:
    c: float
    threshold: float
    p_of_c: float


@dataclass
class DinkelbachTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False

    def append(self, c, threshold, p_of_c):
        self.iterations.append(DinkelbachStep(float(c), float(threshold), float(p_of_c)))

    @property
    def final(self) -> Optional[DinkelbachStep]:
        return self.iterations[-1] if self.iterations else None


@dataclass
class OptimizationResult:
    threshold: float
    paoi: float
    method: str
    parameter: str = "theta"
    converged: bool = True
    flat: bool = False
    iterations: int = 0
    residuals: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    trace: Optional[DinkelbachTrace] = None

    @property
    def waits_for_completion(self) -> bool:
        return math.isinf(self.threshold)
