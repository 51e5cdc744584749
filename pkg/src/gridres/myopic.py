"""Per-step threshold controllers that use only the current imbalance and SoC.

All step functions work in per-step energies: ``delta`` is the imbalance
energy ``Delta_i * h`` and ``eps_pg`` the band half-width ``eps * P_g(i) * h``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from . import battery as bat
from .battery import BatterySpec
from .problem import DispatchResult, ProblemSpec, SocBand, make_result

POLICIES = ("alg1", "alg2", "alg3")


def alg1_step(spec: BatterySpec, b_prev: float, delta: float, h: float) -> float:
    """Cancel as much of ``delta`` as the battery allows."""
    s_lo, s_hi = bat.feasible_range(spec, b_prev, h)
    if delta > 0:
        return max(-delta, s_lo)
    return min(-delta, s_hi)


def alg2_step(spec: BatterySpec, b_prev: float, delta: float, eps_pg: float, h: float) -> float:
    """Pull the residual back to the nearest edge of ``[-eps_pg, eps_pg]``."""
    if eps_pg < 0:
        raise ValueError("eps_pg must be nonnegative")
    s_lo, s_hi = bat.feasible_range(spec, b_prev, h)
    if delta > eps_pg:
        return max(-delta + eps_pg, s_lo)
    if -eps_pg < delta < eps_pg:
        return 0.0
    return min(-delta - eps_pg, s_hi)


def soc_flag(soc: float, band: SocBand) -> int:
    if soc <= band.soc_l:
        return 1
    if soc <= band.soc_u:
        return 2
    return 3


def imbalance_flag(delta: float, eps_pg: float) -> int:
    if delta <= -eps_pg:
        return 1
    if delta <= eps_pg:
        return 2
    return 3


def alg3_step(spec: BatterySpec, band: SocBand, b_prev: float, delta: float, eps_pg: float,
              h: float) -> float:
    """Band-aware threshold control with SoC replenishment.

    Out-of-band imbalance is corrected toward the nearest band edge as long as
    the SoC allows it; in-band imbalance is used to steer the SoC back to the
    middle of the band without pushing the residual out of the band.
    """
    s_lo, s_hi = bat.feasible_range(spec, b_prev, h)
    soc = b_prev / spec.b_rated
    f_soc = soc_flag(soc, band)
    f_delta = imbalance_flag(delta, eps_pg)
    to_upper = (band.soc_u - soc) * spec.b_rated / spec.eta_ch
    to_mid_ch = (band.soc_bar - soc) * spec.b_rated / spec.eta_ch
    to_mid_dis = (band.soc_bar - soc) * spec.b_rated * spec.eta_dis
    to_lower = (band.soc_l - soc) * spec.b_rated * spec.eta_dis

    if f_delta == 1 and f_soc in (1, 2):
        s = max(min(s_hi, to_upper, -delta - eps_pg), 0.0)
    elif f_delta == 3 and f_soc in (2, 3):
        s = min(max(s_lo, to_lower, -delta + eps_pg), 0.0)
    elif f_delta == 2 and (f_soc == 1 or (f_soc == 2 and soc <= band.soc_bar)):
        s = max(min(s_hi, to_mid_ch, -delta + eps_pg), 0.0)
    elif f_delta == 2:
        s = min(max(s_lo, to_mid_dis, -delta - eps_pg), 0.0)
    else:
        # SoC low while discharge is needed, or SoC high while charge is needed
        s = 0.0
    return min(max(s, s_lo), s_hi)


def run_policy(policy: str, problem: ProblemSpec, band: Optional[SocBand] = None) -> DispatchResult:
    """Roll a per-step controller over the whole series.

    ``band`` defaults to the SoC band of the problem's penalty, if any.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    if policy == "alg3":
        if band is None and problem.soc_penalty is not None:
            band = problem.soc_penalty.band
        if band is None:
            raise ValueError("alg3 needs a SoC band")
    spec = problem.battery
    h = problem.h
    delta = problem.series.delta * h
    # alg1 ignores the band by construction
    eps_pg = problem.series.p_g * problem.response.eps * h
    s = np.empty(problem.n)
    b_prev = problem.initial_energy
    for i in range(problem.n):
        if policy == "alg1":
            si = alg1_step(spec, b_prev, delta[i], h)
        elif policy == "alg2":
            si = alg2_step(spec, b_prev, delta[i], eps_pg[i], h)
        else:
            si = alg3_step(spec, band, b_prev, delta[i], eps_pg[i], h)
        b_prev = bat.step(spec, b_prev, si)
        s[i] = si
    return make_result(problem, s, method=policy, project=False)
