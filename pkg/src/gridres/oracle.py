"""Brute-force reference solver for tiny horizons.

Every step offers a grid of actions spanning the feasible range at the
current stored energy, augmented with the actions at which the cost has a
kink (zero, full cancellation, both band edges, SoC band edges) and the two
range ends.  All trajectories through these grids are enumerated
breadth-first with exact battery simulation, and the cheapest wins.  Ties
go to the least total throughput, then to the lexicographically smallest
action sequence.

Zoom rounds then re-enumerate on grids shrunk around the incumbent.  They
matter for quadratic costs, whose optima sit between grid points, and for
linear costs whose optimum is pinned by stored energy several steps later
(e.g. discharge just enough now that later charging ends exactly full),
which no per-step target captures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .battery import BatterySpec
from .problem import DispatchResult, ProblemSpec, SocBand, SocPenalty, make_result
from .response import ResponseModel
from .timeseries import ImbalanceSeries

MAX_STATES = 10_000_000


@dataclass(frozen=True)
class OracleConfig:
    """Grid resolution and horizon cap of :func:`brute_force`.

    ``levels`` points span each step's feasible range (odd, so 0 is always on
    the grid); ``refine_rounds`` zoom passes follow, each shrinking the
    per-step window around the incumbent by a factor of about
    ``(levels - 1) / 4``.
    """

    levels: int = 11
    max_n: int = 4
    refine_rounds: int = 20

    def __post_init__(self):
        if self.levels < 3 or self.levels % 2 == 0:
            raise ValueError("levels must be an odd integer >= 3")
        if self.max_n < 1:
            raise ValueError("max_n must be positive")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be nonnegative")
        # targets add at most 9 points per step
        if float(self.levels + 9) ** self.max_n > MAX_STATES:
            raise ValueError(f"levels={self.levels}, max_n={self.max_n} enumerates more than "
                             f"{MAX_STATES} trajectories")


class HorizonError(ValueError):
    pass


def _range(bt, b_prev, h):
    hi = np.minimum(bt.delta_max * h, (bt.b_max - b_prev) / bt.eta_ch)
    lo = np.maximum(bt.delta_min * h, (bt.b_min - b_prev) * bt.eta_dis)
    return np.minimum(lo, 0.0), np.maximum(hi, 0.0)


def _to_energy(bt, b_prev, b_target):
    """Action that moves the stored energy from ``b_prev`` to ``b_target``."""
    gap = b_target - b_prev
    return np.where(gap >= 0, gap / bt.eta_ch, gap * bt.eta_dis)


def _step(bt, b_prev, s):
    b = b_prev + np.maximum(s, 0.0) * bt.eta_ch - np.maximum(-s, 0.0) / bt.eta_dis
    return np.clip(b, bt.b_min, bt.b_max)


def _step_cost(spec, i, s, b):
    theta = np.maximum(np.abs(spec.series.delta[i] + s / spec.h) - spec.eps_pg[i], 0.0)
    pen = spec.soc_penalty
    if pen is None:
        return theta if spec.cost == "linear" else theta * theta
    soc = b / spec.battery.b_rated
    beta = pen.lam * np.maximum(np.abs(soc - pen.band.soc_bar) - pen.band.gamma, 0.0)
    return theta + beta if spec.cost == "linear" else (theta + beta) ** 2


def _candidates(spec, i, b_prev, levels, window):
    """Per-state candidate actions, shape (states, points)."""
    bt, h = spec.battery, spec.h
    lo, hi = _range(bt, b_prev, h)
    if window is None:
        base = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, levels)[None, :]
    else:
        centre, half = window
        base = centre + half * np.linspace(-1.0, 1.0, levels)
        base = np.broadcast_to(base, (b_prev.size, levels))
        base = np.concatenate([base, np.full((b_prev.size, 1), centre)], axis=1)
    d, e = spec.series.delta[i] * h, spec.eps_pg[i] * h
    tgt = [np.zeros_like(lo), lo, hi, np.full_like(lo, -d), np.full_like(lo, -d - e),
           np.full_like(lo, -d + e)]
    pen = spec.soc_penalty
    if pen is not None:
        for level in (pen.band.soc_u, pen.band.soc_l):
            tgt.append(_to_energy(bt, b_prev, level * bt.b_rated))
    cand = np.concatenate([base, np.stack(tgt, axis=1)], axis=1)
    return np.clip(cand, lo[:, None], hi[:, None])


def _enumerate(spec, levels, windows=None):
    n = spec.n
    paths = np.zeros((1, 0))
    b = np.array([spec.initial_energy])
    cost = np.zeros(1)
    for i in range(n):
        cand = _candidates(spec, i, b, levels, None if windows is None else windows[i])
        k, m = cand.shape
        if k * m > MAX_STATES:
            raise HorizonError("oracle enumeration too large; lower levels or the horizon")
        s = cand.ravel()
        b_new = _step(spec.battery, np.repeat(b, m), s)
        cost = np.repeat(cost, m) + _step_cost(spec, i, s, b_new)
        paths = np.concatenate([np.repeat(paths, m, axis=0), s[:, None]], axis=1)
        b = b_new
    best = cost.min()
    tie = np.flatnonzero(cost <= best + 1e-12 * (1.0 + abs(best)))
    if tie.size > 1:
        # least battery throughput first, then the lexicographically smallest path
        keys = list(paths[tie].T[::-1]) + [np.round(np.abs(paths[tie]).sum(axis=1), 9)]
        pick = tie[np.lexsort(keys)[0]]
    else:
        pick = tie[0]
    return paths[pick], float(cost[pick])


def brute_force(spec: ProblemSpec, cfg: OracleConfig = OracleConfig()) -> DispatchResult:
    """Minimum-cost trajectory over the augmented grids (see module docs)."""
    if spec.n > cfg.max_n:
        raise HorizonError(f"horizon {spec.n} exceeds the oracle cap of {cfg.max_n}")
    s, obj = _enumerate(spec, cfg.levels)
    bt = spec.battery
    half = np.full(spec.n, max(bt.delta_max, -bt.delta_min) * spec.h)
    for _ in range(cfg.refine_rounds):
        half = half * 4.0 / (cfg.levels - 1)
        s_new, obj_new = _enumerate(spec, cfg.levels, list(zip(s, half)))
        if obj_new <= obj:
            s, obj = s_new, obj_new
    res = make_result(spec, s, method="oracle", project=False)
    res.solver_stats = {"levels": cfg.levels, "refine_rounds": cfg.refine_rounds,
                        "enumerated_objective": obj}
    return res


VARIANTS = ("P_L", "P_Q", "P_L_eps", "P_Q_eps", "P_LS_eps", "P_QS_eps")


def random_instance(rng: np.random.Generator, n: int, variant: int) -> ProblemSpec:
    """Random small problem of variant ``VARIANTS[variant]`` for cross-checks.

    Imbalances ~ N(0, 60) MW against 500-1500 MW of generation, 20-200 MWh
    batteries at 1C with efficiencies drawn from {1, 0.95} and {1, 0.9},
    hourly or 15-minute steps and a random initial energy.
    """
    cost = "quadratic" if variant % 2 else "linear"
    kind = variant // 2
    series = ImbalanceSeries(rng.normal(0.0, 60.0, n), rng.uniform(500.0, 1500.0, n),
                             float(rng.choice([1.0, 0.25])))
    bt = BatterySpec.from_c_rating(rng.uniform(20.0, 200.0), eta_ch=float(rng.choice([1.0, 0.95])),
                                   eta_dis=float(rng.choice([1.0, 0.9])))
    pen = SocPenalty(rng.uniform(0.0, 50.0), SocBand(0.4, 0.8)) if kind == 2 else None
    return ProblemSpec(series, bt, cost, kind > 0, ResponseModel(rng.uniform(0.0, 0.05)), pen,
                       b0=rng.uniform(0.0, 1.0) * bt.b_max)
