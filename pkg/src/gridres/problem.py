"""Problem definitions shared by the myopic controllers, the horizon optimizers
and the brute-force oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import battery as bat
from .battery import BatterySpec
from .metrics import ReliabilityReport, report
from .response import ResponseModel
from .timeseries import ImbalanceSeries

COSTS = ("linear", "quadratic")


@dataclass(frozen=True)
class SocBand:
    """Preferred state-of-charge band ``[soc_l, soc_u]``."""

    soc_l: float
    soc_u: float

    def __post_init__(self):
        if not 0 <= self.soc_l < self.soc_u <= 1:
            raise ValueError("need 0 <= soc_l < soc_u <= 1")

    @classmethod
    def parse(cls, text: str) -> "SocBand":
        lo, hi = text.split(":")
        return cls(float(lo), float(hi))

    @property
    def soc_bar(self) -> float:
        return 0.5 * (self.soc_l + self.soc_u)

    @property
    def gamma(self) -> float:
        return self.soc_bar - self.soc_l


@dataclass(frozen=True)
class SocPenalty:
    lam: float
    band: SocBand

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class ProblemSpec:
    """One horizon dispatch problem.

    ``cost`` and ``response_aware`` select between the plain and the
    band-thresholded imbalance cost; ``soc_penalty`` adds the SoC-band hinge.
    Without response awareness the band is ignored (epsilon treated as 0).
    """

    series: ImbalanceSeries
    battery: BatterySpec
    cost: str = "linear"
    response_aware: bool = False
    response: ResponseModel = field(default_factory=lambda: ResponseModel(epsilon=0.0))
    soc_penalty: Optional[SocPenalty] = None
    b0: Optional[float] = None

    def __post_init__(self):
        if self.cost not in COSTS:
            raise ValueError(f"cost must be one of {COSTS}")
        if self.soc_penalty is not None and not self.response_aware:
            raise ValueError("SoC management is only defined for response-aware problems")
        b0 = self.initial_energy
        if not self.battery.b_min - 1e-12 <= b0 <= self.battery.b_max + 1e-12:
            raise ValueError(f"initial energy {b0} outside battery bounds")

    @property
    def n(self) -> int:
        return self.series.n

    @property
    def h(self) -> float:
        return self.series.step_h

    @property
    def epsilon(self) -> float:
        return self.response.eps if self.response_aware else 0.0

    @property
    def initial_energy(self) -> float:
        if self.b0 is not None:
            return float(self.b0)
        return 0.5 * self.battery.b_rated

    @property
    def eps_pg(self) -> np.ndarray:
        """Tolerable imbalance band half-width per sample (MW)."""
        return self.epsilon * self.series.p_g

    @property
    def variant(self) -> str:
        name = "P_L" if self.cost == "linear" else "P_Q"
        if self.soc_penalty is not None:
            return name + "S_eps"
        return name + ("_eps" if self.response_aware else "")

    def objective(self, s) -> float:
        """True cost of an energy trajectory ``s`` (simulated exactly, no epigraph)."""
        s, b = bat.simulate(self.battery, self.initial_energy, s, self.h)
        return objective_from(self, s, b)


def objective_from(spec: ProblemSpec, s: np.ndarray, b: np.ndarray) -> float:
    theta = np.maximum(np.abs(spec.series.delta + s / spec.h) - spec.eps_pg, 0.0)
    if spec.soc_penalty is None:
        return float(theta.sum()) if spec.cost == "linear" else float(np.dot(theta, theta))
    pen = spec.soc_penalty
    soc = b / spec.battery.b_rated
    beta = pen.lam * np.maximum(np.abs(soc - pen.band.soc_bar) - pen.band.gamma, 0.0)
    if spec.cost == "linear":
        return float(theta.sum() + beta.sum())
    return float(np.sum((theta + beta) ** 2))


@dataclass
class DispatchResult:
    """Dispatch trajectories plus their cost and reliability indices.

    ``s`` holds per-step energies (MWh), ``b`` the stored energy after each
    step, ``residuals`` the net imbalance in MW after storage action.
    """

    s: np.ndarray
    b: np.ndarray
    soc: np.ndarray
    residuals: np.ndarray
    objective: float
    report: Optional[ReliabilityReport] = None
    method: str = ""
    solver_stats: dict = field(default_factory=dict)
    complementarity_violations: int = 0
    certified: bool = True
    gap: float = 0.0

    def summary(self) -> dict:
        out = {"method": self.method, "objective": self.objective,
               "complementarity_violations": self.complementarity_violations,
               "certified": self.certified, "gap": self.gap}
        if self.report is not None:
            out["report"] = self.report.to_dict()
        out["solver_stats"] = {k: v for k, v in self.solver_stats.items()
                               if isinstance(v, (int, float, str, bool))}
        return out

    def to_dict(self) -> dict:
        out = self.summary()
        out.update(s=self.s.tolist(), b=self.b.tolist(), soc=self.soc.tolist(),
                   residuals=self.residuals.tolist())
        return out


def make_result(spec: ProblemSpec, s, method: str, project: bool = True,
                **extra) -> DispatchResult:
    """Build a :class:`DispatchResult` from an energy trajectory, re-simulating
    the battery exactly so the stored trajectory satisfies the dynamics."""
    s, b = bat.simulate(spec.battery, spec.initial_energy, s, spec.h, project=project)
    soc = b / spec.battery.b_rated
    res = spec.series.delta + s / spec.h
    rep = report(spec.series, res, soc, spec.epsilon)
    return DispatchResult(s=s, b=b, soc=soc, residuals=res, objective=objective_from(spec, s, b),
                          report=rep, method=method, **extra)
