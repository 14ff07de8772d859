"""Solver options, reports and the equilibrium bundle."""
import enum
from dataclasses import dataclass, field
from typing import List, Optional

from config import config
from market.errors import ParameterError
from market.models import GroupUtilities, Matching, SystematicUtilities


class Method(enum.Enum):
    """Equilibrium solvers."""

    IPFP = "ipfp"
    MINEMAX = "minemax"
    CHOOSIOW_F = "choosiow_f"
    LP_DISCRETE = "lp_discrete"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown method '{value}' (expected one of {names})")


@dataclass
class SolveOptions:
    """Tolerance on the max margin residual, iteration cap, method and IPFP damping."""

    tol: float = config.FEASIBILITY_TOL
    max_iter: int = config.MAX_ITER
    method: Method = Method.IPFP
    damping: float = 1.0
    jobs: int = config.JOBS
    trace: bool = False

    def __post_init__(self):
        self.method = Method.parse(self.method)
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ParameterError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.damping <= 1:
            raise ParameterError(f"damping must lie in (0, 1], got {self.damping}")
        if int(self.jobs) < 1:
            raise ParameterError(f"jobs must be at least 1, got {self.jobs}")
        self.max_iter = int(self.max_iter)
        self.jobs = int(self.jobs)

    def replace(self, **changes) -> "SolveOptions":
        values = {
            "tol": self.tol,
            "max_iter": self.max_iter,
            "method": self.method,
            "damping": self.damping,
            "jobs": self.jobs,
            "trace": self.trace,
        }
        values.update(changes)
        return SolveOptions(**values)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    final_residual: float
    social_welfare: float
    wall_time: float
    method: str = ""
    message: str = ""
    objective_trace: List[float] = field(default_factory=list)

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "social_welfare": self.social_welfare,
            "method": self.method,
            "message": self.message,
        }
        if timings:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class Equilibrium:
    """Solver output: the stable matching with the utilities that support it."""

    matching: Matching
    utilities: GroupUtilities
    report: SolveReport
    systematic: Optional[SystematicUtilities] = None
