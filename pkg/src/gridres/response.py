"""System response: frequency nadir and the permissible imbalance band."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .timeseries import ImbalanceSeries


@dataclass(frozen=True)
class ResponseModel:
    """Tolerable imbalance as a fraction ``epsilon`` of scheduled generation.

    ``epsilon`` may instead be derived from physical parameters: nominal
    frequency ``f0`` (Hz), governor dead band ``f_db`` (Hz), the allowed
    frequency excursion ``delta_f_allow = f0 - f_min`` (Hz) and the lumped
    inertia-times-ramp product per MW of generation ``mhc_per_pg``
    (MW/Hz per MW).
    """

    epsilon: Optional[float] = None
    f0: Optional[float] = None
    f_db: Optional[float] = None
    delta_f_allow: Optional[float] = None
    mhc_per_pg: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.delta_f_allow is not None and self.f_db is not None:
            if self.delta_f_allow <= self.f_db:
                raise ValueError("delta_f_allow must exceed the dead band")

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseModel":
        return cls(**{k: d[k] for k in ("epsilon", "f0", "f_db", "delta_f_allow", "mhc_per_pg")
                      if k in d})

    @property
    def eps(self) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        if None in (self.f_db, self.delta_f_allow, self.mhc_per_pg):
            raise ValueError("response model needs epsilon or (f_db, delta_f_allow, mhc_per_pg)")
        return 2.0 * self.mhc_per_pg * (self.delta_f_allow - self.f_db)


def nadir(mhc: float, r: float, f0: float, f_db: float) -> float:
    """Lowest frequency reached after an imbalance ``r`` MW, with ``mhc`` in MW/Hz."""
    if mhc <= 0:
        raise ValueError("mhc must be positive")
    if r < 0:
        raise ValueError("imbalance magnitude must be nonnegative")
    return f0 - f_db - r / (2.0 * mhc)


def max_safe_imbalance(model: ResponseModel, p_g: float) -> float:
    if p_g < 0:
        raise ValueError("p_g must be nonnegative")
    return model.eps * p_g


def band(model: ResponseModel, series: ImbalanceSeries) -> tuple[np.ndarray, np.ndarray]:
    half = model.eps * series.p_g
    return -half, half
