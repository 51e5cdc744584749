"""Imbalance time series: container, CSV ingestion, resampling and synthesis."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

# relative tolerance on timestamp spacing when inferring the step
SPACING_RTOL = 0.01


class IngestionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImbalanceSeries:
    """Net imbalance ``delta`` (MW, signed) and scheduled generation ``p_g`` (MW)
    sampled every ``step_h`` hours."""

    delta: np.ndarray
    p_g: np.ndarray
    step_h: float
    start_time: Optional[pd.Timestamp] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float)
        p_g = np.array(self.p_g, dtype=float)
        if p_g.ndim == 0:
            p_g = np.full(delta.shape, float(p_g))
        if delta.ndim != 1 or delta.size < 1:
            raise IngestionError("delta must be a non-empty 1-D sequence")
        if p_g.shape != delta.shape:
            raise IngestionError("delta and p_g must have the same length")
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(p_g))):
            raise IngestionError("series contains missing or non-finite values")
        if np.any(p_g < 0):
            raise IngestionError("scheduled generation p_g must be nonnegative")
        if not self.step_h > 0:
            raise IngestionError("step_h must be positive")
        delta.setflags(write=False)
        p_g.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "p_g", p_g)
        object.__setattr__(self, "step_h", float(self.step_h))

    @property
    def n(self) -> int:
        return int(self.delta.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, ImbalanceSeries):
            return NotImplemented
        return (self.step_h == other.step_h and np.array_equal(self.delta, other.delta)
                and np.array_equal(self.p_g, other.p_g))

    def slice(self, start: int, stop: int) -> "ImbalanceSeries":
        return ImbalanceSeries(self.delta[start:stop], self.p_g[start:stop], self.step_h,
                               self.start_time, dict(self.meta))

    def scaled(self, factor: float) -> "ImbalanceSeries":
        return ImbalanceSeries(self.delta * factor, self.p_g * factor, self.step_h,
                               self.start_time, dict(self.meta))


def load_csv(path: Union[str, Path], col_delta: str = "delta", col_pg: Optional[str] = "p_g",
             col_time: Optional[str] = None, p_g_const: Optional[float] = None,
             step_h: Optional[float] = None, negate_delta: bool = False,
             interpolate_gaps: bool = False) -> ImbalanceSeries:
    """Read an imbalance series from a comma-separated file with a header row.

    Either ``col_pg`` names a generation column or ``p_g_const`` supplies a
    constant.  ``step_h`` is inferred from ``col_time`` when not given (a column
    named ``time`` is used if ``col_time`` is not set); spacing that varies by more than 1% is rejected.  Missing values are an error
    unless ``interpolate_gaps`` is set.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    df = pd.read_csv(path, sep=",", float_precision="round_trip")
    if col_delta not in df.columns:
        raise IngestionError(f"missing column {col_delta!r}")
    meta: dict = {"source": str(path)}

    if p_g_const is not None:
        p_g = np.full(len(df), float(p_g_const))
    elif col_pg is not None and col_pg in df.columns:
        p_g = df[col_pg].to_numpy(dtype=float)
    else:
        raise IngestionError(f"missing column {col_pg!r} and no constant p_g given")
    delta = df[col_delta].to_numpy(dtype=float)

    gaps = np.isnan(delta) | np.isnan(p_g)
    if gaps.any():
        if not interpolate_gaps:
            raise IngestionError(f"{int(gaps.sum())} missing values; pass interpolate_gaps to fill")
        idx = np.arange(len(df))
        for arr in (delta, p_g):
            bad = np.isnan(arr)
            arr[bad] = np.interp(idx[bad], idx[~bad], arr[~bad])
        meta["interpolated"] = int(gaps.sum())

    start_time = None
    if col_time is None and step_h is None and "time" in df.columns:
        col_time = "time"
    if col_time is not None:
        if col_time not in df.columns:
            raise IngestionError(f"missing column {col_time!r}")
        times = pd.to_datetime(df[col_time])
        start_time = times.iloc[0]
        if len(times) > 1:
            diffs = np.diff(times.to_numpy()).astype("timedelta64[ns]").astype(np.int64) / 3.6e12
            if np.any(diffs <= 0):
                raise IngestionError("timestamps are not strictly increasing")
            if step_h is None:
                ref = float(np.median(diffs))
                if np.any(np.abs(diffs - ref) > SPACING_RTOL * ref):
                    raise IngestionError("irregular spacing; pass step_h explicitly")
                step_h = ref
    if step_h is None:
        raise IngestionError("cannot infer step_h without a time column")
    if np.any(p_g < 0):
        raise IngestionError("negative p_g in input")
    if negate_delta:
        delta = -delta
    return ImbalanceSeries(delta, p_g, step_h, start_time, meta)


def write_csv(series: ImbalanceSeries, path: Union[str, Path], with_time: bool = True) -> None:
    """Write a series so that :func:`load_csv` reads it back bit-exactly."""
    cols = {"delta": series.delta, "p_g": series.p_g}
    df = pd.DataFrame(cols)
    if with_time:
        start = series.start_time if series.start_time is not None else pd.Timestamp("2000-01-01")
        ns = np.round(np.arange(series.n) * series.step_h * 3.6e12).astype(np.int64)
        df.insert(0, "time", start + pd.to_timedelta(ns, unit="ns"))
    df.to_csv(path, index=False, float_format="%.17g")


def resample(series: ImbalanceSeries, new_step_h: float) -> ImbalanceSeries:
    """Average ``delta`` and ``p_g`` over bins of ``new_step_h``; a trailing
    partial bin is dropped."""
    ratio = new_step_h / series.step_h
    k = int(round(ratio))
    if k < 1 or not math.isclose(ratio, k, rel_tol=1e-9):
        raise ValueError(f"new step {new_step_h} is not an integer multiple of {series.step_h}")
    if k == 1:
        return series
    m = series.n // k
    if m == 0:
        raise ValueError("series shorter than one resampled bin")
    delta = series.delta[: m * k].reshape(m, k).mean(axis=1)
    p_g = series.p_g[: m * k].reshape(m, k).mean(axis=1)
    return ImbalanceSeries(delta, p_g, series.step_h * k, series.start_time, dict(series.meta))


@dataclass(frozen=True)
class SynthModel:
    """Parameters of the synthetic imbalance generator.

    ``delta`` follows a discretised Ornstein-Uhlenbeck process with the given
    reversion rate (1/h), stationary mean and volatility (MW/sqrt(h)).
    ``p_g`` is ``pg_mean`` plus an optional daily sinusoid.  An optional spike
    adds ``spike_mw`` to ``delta`` for ``spike_len`` samples from ``spike_index``.
    Random events start at each sample with probability ``event_rate`` and add
    ``+-event_mw`` (random sign) for ``event_len`` samples.
    """

    step_h: float = 1.0 / 60.0
    reversion: float = 0.5
    mean: float = 0.0
    volatility: float = 100.0
    pg_mean: float = 10000.0
    pg_amplitude: float = 0.0
    pg_period_h: float = 24.0
    spike_index: Optional[int] = None
    spike_mw: float = 0.0
    spike_len: int = 1
    event_rate: float = 0.0
    event_mw: float = 0.0
    event_len: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "SynthModel":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SynthModel":
        return cls.from_dict(json.loads(text))


def synth(n: int, model: SynthModel = SynthModel(), seed: int = 0) -> ImbalanceSeries:
    """Deterministic synthetic imbalance series for a fixed ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if model.volatility < 0:
        raise ValueError("volatility must be nonnegative")
    if model.pg_mean <= 0 or model.pg_amplitude >= model.pg_mean:
        raise ValueError("p_g profile must stay positive")
    if not 0 <= model.event_rate <= 1 or model.event_len < 1 or model.spike_len < 1:
        raise ValueError("event_rate must lie in [0, 1] and event lengths be positive")
    rng = np.random.default_rng(seed)
    h = model.step_h
    a = math.exp(-model.reversion * h)
    if model.reversion > 0:
        sd = model.volatility * math.sqrt((1 - a * a) / (2 * model.reversion))
    else:
        sd = model.volatility * math.sqrt(h)
    noise = rng.standard_normal(n) * sd
    delta = np.empty(n)
    x = model.mean
    for i in range(n):
        x = model.mean + a * (x - model.mean) + noise[i]
        delta[i] = x
    if model.spike_index is not None:
        if not 0 <= model.spike_index < n:
            raise ValueError("spike_index outside the series")
        delta[model.spike_index: model.spike_index + model.spike_len] += model.spike_mw
    if model.event_rate > 0:
        starts = np.flatnonzero(rng.random(n) < model.event_rate)
        signs = rng.choice([-1.0, 1.0], size=starts.size)
        for k, sgn in zip(starts, signs):
            delta[k: k + model.event_len] += sgn * model.event_mw
    t = np.arange(n) * h
    p_g = model.pg_mean + model.pg_amplitude * np.sin(2 * np.pi * t / model.pg_period_h)
    return ImbalanceSeries(delta, p_g, h, meta={"synth_seed": seed})
