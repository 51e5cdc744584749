"""Reliability indices over residual-imbalance trajectories."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .timeseries import ImbalanceSeries


@dataclass(frozen=True)
class ReliabilityReport:
    """All reliability and performance indices of one dispatch.

    SAIDI values are in sample-equivalents; multiply by ``step_h * 60`` for
    minutes.  ``lambda_linear`` is in percent-samples and ``lambda_quad`` in
    percent-squared-samples scaled by 100, matching the tabulated layout.
    """

    saidi_mod: float
    saidi_eps_mod: float
    ri_mod: float
    ri_eps_mod: float
    lambda_linear: float
    lambda_quad: float
    mean_soc: Optional[float]
    p_g_bar: float
    epsilon: float
    n: int

    def saidi_minutes(self, step_h: float, response_aware: bool = True) -> float:
        value = self.saidi_eps_mod if response_aware else self.saidi_mod
        return value * step_h * 60.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def saidi_classic(interruptions: Iterable[tuple[float, float]], total_customers: float) -> float:
    """Customer-weighted interruption duration per customer served."""
    if total_customers <= 0:
        raise ValueError("total_customers must be positive")
    total = 0.0
    for duration, customers in interruptions:
        if duration < 0 or customers < 0:
            raise ValueError("durations and customer counts must be nonnegative")
        total += duration * customers
    return total / total_customers


def ri_from_saidi(saidi: float, horizon: float) -> float:
    """Reliability in percent from a SAIDI and the horizon it was measured over."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if saidi < 0 or saidi > horizon:
        raise ValueError("saidi must lie in [0, horizon]")
    return 100.0 * (1.0 - saidi / horizon)


def implied_horizon(saidi: float, ri_percent: float) -> float:
    """Horizon that maps ``saidi`` to ``ri_percent`` (inverse of :func:`ri_from_saidi`)."""
    return saidi / (1.0 - ri_percent / 100.0)


def residuals(series: ImbalanceSeries, dispatch: Sequence[float]) -> np.ndarray:
    """Residual imbalance ``delta + s`` with ``s`` given as power (MW)."""
    s = np.asarray(dispatch, dtype=float)
    if s.shape != series.delta.shape:
        raise ValueError(f"dispatch length {s.size} != series length {series.n}")
    return series.delta + s


def excess(res: np.ndarray, p_g: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-sample imbalance beyond the tolerable band ``epsilon * p_g``."""
    return np.maximum(np.abs(res) - epsilon * p_g, 0.0)


def report(series: ImbalanceSeries, res: Sequence[float], soc: Optional[Sequence[float]] = None,
           epsilon: float = 0.0) -> ReliabilityReport:
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    res = np.asarray(res, dtype=float)
    if res.shape != series.delta.shape:
        raise ValueError("residual length does not match the series")
    p_g = series.p_g
    total_pg = float(p_g.sum())
    if total_pg <= 0:
        raise ValueError("scheduled generation sums to zero")
    p_bar = total_pg / series.n
    abs_sum = float(np.abs(res).sum())
    exc = excess(res, p_g, epsilon)
    exc_sum = float(exc.sum())
    return ReliabilityReport(
        saidi_mod=abs_sum / p_bar,
        saidi_eps_mod=exc_sum / p_bar,
        ri_mod=100.0 * (1.0 - abs_sum / total_pg),
        ri_eps_mod=100.0 * (1.0 - exc_sum / total_pg),
        lambda_linear=100.0 * exc_sum / p_bar,
        lambda_quad=100.0 * float(np.dot(exc, exc)) / p_bar ** 2,
        mean_soc=None if soc is None else float(np.mean(soc)),
        p_g_bar=p_bar,
        epsilon=float(epsilon),
        n=series.n,
    )


TABLE_COLUMNS = ("optimization", "epsilon", "lambda_linear", "lambda_quad", "mean_soc",
                 "saidi_eps_mod", "ri_eps_mod")


def format_table(rows: Sequence[tuple[str, ReliabilityReport]]) -> str:
    """Aligned text table, one row per (label, report), fixed 4-decimal floats."""
    cells = [list(TABLE_COLUMNS)]
    for label, rep in rows:
        cells.append([
            label,
            f"{rep.epsilon:.4f}",
            f"{rep.lambda_linear:.4f}",
            f"{rep.lambda_quad:.4f}",
            "-" if rep.mean_soc is None else f"{rep.mean_soc:.4f}",
            f"{rep.saidi_eps_mod:.4f}",
            f"{rep.ri_eps_mod:.4f}",
        ])
    widths = [max(len(r[j]) for r in cells) for j in range(len(TABLE_COLUMNS))]
    lines = []
    for r in cells:
        lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w)
                               for j, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"
