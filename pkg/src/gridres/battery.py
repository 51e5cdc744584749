"""Battery energy model: limits, asymmetric-efficiency dynamics and SoC bookkeeping.

Per-step actions ``s`` are *energies* exchanged with the grid over one sample
(MWh, positive = charging).  Power limits are converted with the sample
duration ``h`` so that ``delta_max * h`` is the largest energy a step can absorb.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class BoundViolation(ValueError):
    """Raised when a battery step leaves the admissible energy range."""

    def __init__(self, side: str, value: float, bound: float):
        self.side = side
        self.value = value
        self.bound = bound
        super().__init__(f"stored energy {value!r} violates {side} bound {bound!r}")


@dataclass(frozen=True)
class BatterySpec:
    """Physical limits of a storage unit.

    Attributes
    ----------
    b_min, b_max : float
        Stored-energy bounds in MWh.
    b_rated : float
        Rated capacity used for state of charge, ``soc = b / b_rated``.
    delta_max : float
        Maximum charging power in MW (> 0).
    delta_min : float
        Maximum discharging power in MW (< 0).
    eta_ch, eta_dis : float
        Charge and discharge efficiencies in (0, 1].
    """

    b_min: float
    b_max: float
    b_rated: float
    delta_max: float
    delta_min: float
    eta_ch: float = 1.0
    eta_dis: float = 1.0

    def __post_init__(self):
        if not 0 <= self.b_min < self.b_max:
            raise ValueError("need 0 <= b_min < b_max")
        if self.b_rated < self.b_max:
            raise ValueError("b_rated must be >= b_max")
        if self.delta_max <= 0 or self.delta_min >= 0:
            raise ValueError("need delta_max > 0 and delta_min < 0")
        for name in ("eta_ch", "eta_dis"):
            eta = getattr(self, name)
            if not 0 < eta <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_c_rating(cls, energy_mwh: float, c_charge: float = 1.0, c_discharge: float = 1.0,
                      eta_ch: float = 1.0, eta_dis: float = 1.0,
                      soc_min: float = 0.0, soc_max: float = 1.0) -> "BatterySpec":
        """Battery of ``energy_mwh`` that fully charges in ``1/c_charge`` hours
        and fully discharges in ``1/c_discharge`` hours."""
        if energy_mwh <= 0:
            raise ValueError("energy_mwh must be positive")
        return cls(b_min=soc_min * energy_mwh, b_max=soc_max * energy_mwh, b_rated=energy_mwh,
                   delta_max=c_charge * energy_mwh, delta_min=-c_discharge * energy_mwh,
                   eta_ch=eta_ch, eta_dis=eta_dis)

    def s_min(self, h: float) -> float:
        return self.delta_min * h

    def s_max(self, h: float) -> float:
        return self.delta_max * h

    def scaled(self, factor: float) -> "BatterySpec":
        """Same chemistry, all energy and power limits multiplied by ``factor``."""
        return BatterySpec(self.b_min * factor, self.b_max * factor, self.b_rated * factor,
                           self.delta_max * factor, self.delta_min * factor,
                           self.eta_ch, self.eta_dis)

    def to_dict(self) -> dict:
        return {"b_min": self.b_min, "b_max": self.b_max, "b_rated": self.b_rated,
                "delta_max": self.delta_max, "delta_min": self.delta_min,
                "eta_ch": self.eta_ch, "eta_dis": self.eta_dis}


@dataclass(frozen=True)
class BatteryState:
    b: float
    soc: float


# absolute slack on bound checks, absorbs float rounding in b_prev + s*eta
BOUND_TOL = 1e-9


def step(spec: BatterySpec, b_prev: float, s: float) -> float:
    """Stored energy after exchanging ``s`` MWh with the grid."""
    b = b_prev + max(s, 0.0) * spec.eta_ch - max(-s, 0.0) / spec.eta_dis
    if b > spec.b_max + BOUND_TOL:
        raise BoundViolation("upper", b, spec.b_max)
    if b < spec.b_min - BOUND_TOL:
        raise BoundViolation("lower", b, spec.b_min)
    return min(max(b, spec.b_min), spec.b_max)


def feasible_range(spec: BatterySpec, b_prev: float, h: float) -> tuple[float, float]:
    """Admissible per-step energy interval ``(s_lo, s_hi)`` given ``b_prev``."""
    s_hi = min(spec.delta_max * h, (spec.b_max - b_prev) / spec.eta_ch)
    s_lo = max(spec.delta_min * h, (spec.b_min - b_prev) * spec.eta_dis)
    return min(s_lo, 0.0), max(s_hi, 0.0)


def simulate(spec: BatterySpec, b0: float, s: Sequence[float], h: float,
             project: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Roll the dynamics forward over a trajectory.

    With ``project=True`` every action is first clamped into its feasible
    range, which turns a nearly-feasible solver output into an exactly
    feasible one.  Returns ``(s, b)`` where ``b[i]`` is the energy after step i.
    """
    s = np.asarray(s, dtype=float).copy()
    b = np.empty_like(s)
    b_prev = float(b0)
    for i in range(len(s)):
        if project:
            lo, hi = feasible_range(spec, b_prev, h)
            s[i] = min(max(s[i], lo), hi)
        b_prev = step(spec, b_prev, float(s[i]))
        b[i] = b_prev
    return s, b


def soc(spec: BatterySpec, b) -> np.ndarray:
    return np.asarray(b, dtype=float) / spec.b_rated


def mean_soc(trajectory) -> float:
    """Arithmetic mean of the state of charge over a trajectory.

    Accepts either :class:`BatteryState` objects or raw SoC fractions.
    """
    values = [x.soc if isinstance(x, BatteryState) else float(x) for x in trajectory]
    if not values:
        raise ValueError("mean_soc of an empty trajectory")
    return float(np.mean(values))
