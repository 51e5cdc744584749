"""Exact mixed-integer dispatch with McCormick linearised hinges.

The absolute value inside each imbalance hinge is written with a sign binary
``z_i`` and the product ``y_i = z_i * r_i`` of that binary with the residual
``r_i = Delta_i + s_i / h``; McCormick envelopes linearise the product, and
they are exact because one factor is binary.  The SoC hinge gets the same
treatment with ``y2_i = z2_i * SoC_i``.  A third binary per step, ``w_i``,
selects charging or discharging so the energy bookkeeping is exact.

Variable blocks (each of length ``n``)::

    c, d, b, theta, [beta], y1, z1, w, [y2, z2]

The branch-and-bound bounds every node with the epigraph program of
:mod:`gridres.opt_convex` restricted by the binaries fixed so far.  That
program is the continuous relaxation of the MIP tightened by the valid
inequalities ``theta_i >= |r_i| - eps P_g(i)`` (and the matching SoC ones):
every integral point satisfies them, while the bare McCormick relaxation
admits ``theta = 0`` at ``z = 1/2`` and bounds nothing.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import opt_convex
from .opt_convex import _Rows
from .problem import DispatchResult, ProblemSpec, make_result
from .qp import NonConvergence, feasibility_margin

DEFAULT_MAX_HORIZON = 24
DEFAULT_NODE_LIMIT = 5000
INFEASIBLE_MARGIN = 1e-7


class HorizonTooLong(ValueError):
    """The exact solver refuses horizons above its cap."""


@dataclass
class MipProgram:
    """``min 0.5 x'Px + q'x  s.t.  Ax = b, Gx <= h, x[binaries] in {0, 1}``."""

    spec: ProblemSpec
    P: sp.csr_matrix
    q: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    index: dict
    binaries: np.ndarray
    bounds: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.q.size

    def objective(self, x) -> float:
        return 0.5 * float(x @ (self.P @ x)) + float(self.q @ x)

    def violation(self, x) -> float:
        """Largest violation of the linear constraints and of integrality at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.b.size:
            worst = max(worst, float(np.max(np.abs(self.A @ x - self.b))))
        if self.h.size:
            worst = max(worst, float(np.max(self.G @ x - self.h)))
        zb = x[self.binaries]
        worst = max(worst, float(np.max(np.minimum(np.abs(zb), np.abs(zb - 1.0)), initial=0.0)))
        return worst

    def mccormick_error(self, x) -> float:
        """max |y1 - z1 * r| (and |y2 - z2 * SoC|) at ``x``."""
        spec = self.spec
        ix = self.index
        r = spec.series.delta + (x[ix["c"]] - x[ix["d"]]) / spec.h
        err = np.abs(x[ix["y1"]] - x[ix["z1"]] * r)
        if "y2" in ix:
            soc = x[ix["b"]] / spec.battery.b_rated
            err = np.maximum(err, np.abs(x[ix["y2"]] - x[ix["z2"]] * soc))
        return float(err.max(initial=0.0))


def build_mip(spec: ProblemSpec, max_horizon: Optional[int] = DEFAULT_MAX_HORIZON) -> MipProgram:
    """Assemble the McCormick MIP of ``spec``.

    Raises :class:`HorizonTooLong` when ``spec.n`` exceeds ``max_horizon``
    (``None`` disables the cap).
    """
    n = spec.n
    if max_horizon is not None and n > max_horizon:
        raise HorizonTooLong(
            f"horizon {n} exceeds the exact-solver cap of {max_horizon} steps; "
            "use the convex solver (method 'convex') or raise --max-horizon")
    h, bt = spec.h, spec.battery
    pen = spec.soc_penalty
    names = ["c", "d", "b", "theta"] + (["beta"] if pen else []) + ["y1", "z1", "w"] \
        + (["y2", "z2"] if pen else [])
    idx = {name: np.arange(k * n, (k + 1) * n) for k, name in enumerate(names)}
    nx = len(names) * n
    ic, id_, ib, it = idx["c"], idx["d"], idx["b"], idx["theta"]
    iy, iz, iw = idx["y1"], idx["z1"], idx["w"]
    delta = spec.series.delta
    e = spec.eps_pg
    s_max, s_min = bt.delta_max * h, -bt.delta_min * h  # charge / discharge energy caps
    d_lb = delta + bt.delta_min
    d_ub = delta + bt.delta_max

    eq = _Rows(nx)
    rhs = np.zeros(n)
    rhs[0] = spec.initial_energy
    eq.add([ib, ic, id_], [1.0, -bt.eta_ch, 1.0 / bt.eta_dis], rhs)
    A, b = eq.matrix()
    if n > 1:
        A = (A + sp.coo_matrix((-np.ones(n - 1), (np.arange(1, n), ib[:-1])), shape=A.shape)).tocsr()

    g = _Rows(nx)
    # power and energy bounds, with the charge/discharge selector
    g.add([ic], [1.0], np.full(n, s_max))
    g.add([ic], [-1.0], np.zeros(n))
    g.add([id_], [1.0], np.full(n, s_min))
    g.add([id_], [-1.0], np.zeros(n))
    g.add([ib], [1.0], np.full(n, bt.b_max))
    g.add([ib], [-1.0], np.full(n, -bt.b_min))
    g.add([ic, iw], [1.0, -s_max], np.zeros(n))
    g.add([id_, iw], [1.0, s_min], np.full(n, s_min))
    # r_i = delta_i + (c_i - d_i)/h enters rows as (1/h, -1/h) on (c, d) plus delta_i
    ch, dh = 1.0 / h, -1.0 / h
    # theta >= 0, theta >= 2 y1 - r - e
    g.add([it], [-1.0], np.zeros(n))
    g.add([iy, ic, id_, it], [2.0, -ch, -dh, -1.0], delta + e)
    # McCormick envelope of y1 = z1 * r
    g.add([iy, iz], [-1.0, d_lb], np.zeros(n))                          # y >= lb z
    g.add([iy, ic, id_, iz], [-1.0, ch, dh, d_ub], d_ub - delta)        # y >= r + ub z - ub
    g.add([iy, iz], [1.0, -d_ub], np.zeros(n))                          # y <= ub z
    g.add([iy, ic, id_, iz], [1.0, -ch, -dh, -d_lb], delta - d_lb)      # y <= r + lb z - lb
    # sign link: 2 y1 - r >= 0
    g.add([iy, ic, id_], [-2.0, ch, dh], -delta)
    binaries = [iz, iw]
    bounds = {"delta_lb": d_lb, "delta_ub": d_ub}
    if pen is not None:
        ibeta, iy2, iz2 = idx["beta"], idx["y2"], idx["z2"]
        lam = pen.lam
        sbar, gam = pen.band.soc_bar, pen.band.gamma
        inv = 1.0 / bt.b_rated
        soc_min, soc_max = bt.b_min * inv, bt.b_max * inv
        # beta >= 0, beta >= lam (2 y2 - 2 sbar z2 - SoC + sbar - gamma)
        g.add([ibeta], [-1.0], np.zeros(n))
        g.add([iy2, iz2, ib, ibeta], [2 * lam, -2 * lam * sbar, -lam * inv, -1.0],
              np.full(n, lam * (gam - sbar)))
        # McCormick envelope of y2 = z2 * SoC
        g.add([iy2, iz2], [-1.0, soc_min], np.zeros(n))
        g.add([iy2, ib, iz2], [-1.0, inv, soc_max], np.full(n, soc_max))
        g.add([iy2, iz2], [1.0, -soc_max], np.zeros(n))
        g.add([iy2, ib, iz2], [1.0, -inv, -soc_min], np.full(n, -soc_min))
        # sign link: 2 y2 - 2 sbar z2 - (SoC - sbar) >= 0
        g.add([iy2, iz2, ib], [-2.0, 2 * sbar, inv], np.full(n, sbar))
        binaries.append(iz2)
        bounds.update(soc_min=soc_min, soc_max=soc_max)
    binaries = np.concatenate(binaries)
    g.add([binaries], [1.0], np.ones(binaries.size))
    g.add([binaries], [-1.0], np.zeros(binaries.size))
    G, hv = g.matrix()

    q = np.zeros(nx)
    if spec.cost == "linear":
        P = sp.csr_matrix((nx, nx))
        q[it] = 1.0
        if pen is not None:
            q[idx["beta"]] = 1.0
    elif pen is None:
        P = sp.coo_matrix((np.full(n, 2.0), (it, it)), shape=(nx, nx)).tocsr()
    else:
        ibeta = idx["beta"]
        rows = np.concatenate([it, it, ibeta, ibeta])
        cols = np.concatenate([it, ibeta, it, ibeta])
        P = sp.coo_matrix((np.full(4 * n, 2.0), (rows, cols)), shape=(nx, nx)).tocsr()
    return MipProgram(spec, P, q, A, b, G, hv, idx, binaries, bounds)


def lift(mip: MipProgram, s) -> np.ndarray:
    """Integral MIP point for the action trajectory ``s`` (exactly simulated).

    Binaries follow the signs of the residual, the SoC deviation and ``s``;
    every hinge epigraph variable sits at its hinge value.
    """
    spec = mip.spec
    ix = mip.index
    res = make_result(spec, s, method="lift", project=False)
    x = np.zeros(mip.n_vars)
    x[ix["c"]] = np.maximum(res.s, 0.0)
    x[ix["d"]] = np.maximum(-res.s, 0.0)
    x[ix["b"]] = res.b
    r = res.residuals
    x[ix["theta"]] = np.maximum(np.abs(r) - spec.eps_pg, 0.0)
    z1 = (r > 0).astype(float)
    x[ix["z1"]] = z1
    x[ix["y1"]] = z1 * r
    x[ix["w"]] = (res.s > 0).astype(float)
    pen = spec.soc_penalty
    if pen is not None:
        dev = res.soc - pen.band.soc_bar
        x[ix["beta"]] = pen.lam * np.maximum(np.abs(dev) - pen.band.gamma, 0.0)
        z2 = (dev > 0).astype(float)
        x[ix["z2"]] = z2
        x[ix["y2"]] = z2 * res.soc
    return x


@dataclass
class _Node:
    depth: int
    charge_off: tuple
    discharge_off: tuple
    bound: float


def _relax(spec, node, tol):
    """Solve a node; ``None`` when its restrictions leave nothing feasible."""
    program = opt_convex.build(spec, node.charge_off, node.discharge_off)
    try:
        x, stats = opt_convex.solve_program(program, tol=tol)
    except NonConvergence:
        margin = feasibility_margin(program.A, program.b, program.G, program.h)
        if margin > INFEASIBLE_MARGIN:
            return None
        raise
    c = np.maximum(x[program.index["c"]], 0.0)
    d = np.maximum(x[program.index["d"]], 0.0)
    return c, d, stats


def _pick_branch(spec, c, d):
    """Most fractional binary the relaxation could not round for free.

    Only the charge/discharge selector can fail to round: the node program
    already prices every hinge exactly, so sign binaries are always
    repairable.  The selector's fractional value is ``c / (c + d)``.
    """
    over = np.minimum(c, d) > opt_convex.COMPLEMENTARITY_TOL * opt_convex.overlap_scale(spec)
    if not np.any(over):
        return None
    frac = np.where(over, c / np.maximum(c + d, 1e-300), np.nan)
    i = int(np.nanargmin(np.abs(frac - 0.5)))  # first index among ties
    return i, float(frac[i])


def branch_and_bound(mip: MipProgram, tol: float = 1e-7, node_limit: int = DEFAULT_NODE_LIMIT,
                     qp_tol: float = 1e-9) -> DispatchResult:
    """Depth-first branch-and-bound over the MIP binaries.

    ``tol`` is the relative optimality gap at which a node is pruned
    (measured as ``(incumbent - bound) / max(1, |incumbent|)``).  Every node's
    relaxed actions, re-simulated exactly, give a feasible incumbent
    candidate.  When ``node_limit`` is hit the incumbent is returned with
    ``certified=False`` and the remaining gap.
    """
    spec = mip.spec
    t0 = time.perf_counter()
    root = _Node(0, (), (), -np.inf)
    stack = [root]
    best_s, best_obj = None, np.inf
    log = []
    nodes = 0
    root_bound = None
    open_bounds = []
    hit_limit = False

    def gap_ok(bound):
        return bound >= best_obj - tol * max(1.0, abs(best_obj))

    while stack:
        node = stack.pop()
        if best_s is not None and gap_ok(node.bound):
            log.append({"node": None, "depth": node.depth, "status": "pruned-parent"})
            continue
        if nodes >= node_limit:
            hit_limit = True
            open_bounds.append(node.bound)
            open_bounds.extend(nd.bound for nd in stack)
            break
        nodes += 1
        out = _relax(spec, node, qp_tol)
        if out is None:
            log.append({"node": nodes, "depth": node.depth, "status": "infeasible"})
            continue
        c, d, qstats = out
        bound = qstats["program_objective"]
        if root_bound is None:
            root_bound = bound
        cand = make_result(spec, c - d, method="mip")
        if cand.objective < best_obj:
            best_obj, best_s = cand.objective, cand.s
        entry = {"node": nodes, "depth": node.depth, "bound": bound, "incumbent": best_obj}
        if gap_ok(bound):
            entry["status"] = "fathomed"
            log.append(entry)
            continue
        pick = _pick_branch(spec, c, d)
        if pick is None:
            # relaxation is integral after rounding but its re-simulation fell
            # short of the bound only through solver tolerance
            entry["status"] = "integral"
            log.append(entry)
            continue
        i, frac = pick
        entry.update(status="branched", var=f"w[{i}]", value=float(frac))
        log.append(entry)
        charge = _Node(node.depth + 1, node.charge_off, node.discharge_off + (i,), bound)
        discharge = _Node(node.depth + 1, node.charge_off + (i,), node.discharge_off, bound)
        # depth-first: explore the side the relaxation leans to first
        if frac >= 0.5:
            stack.extend([discharge, charge])
        else:
            stack.extend([charge, discharge])

    if best_s is None:
        raise NonConvergence("branch-and-bound found no feasible point", {"nodes": nodes})
    if hit_limit:
        lower = min(open_bounds)
        gap = max(0.0, (best_obj - lower) / max(1.0, abs(best_obj)))
        certified = False
    else:
        gap = 0.0
        certified = True
    x = lift(mip, best_s)
    stats = {"nodes": nodes, "max_depth": max((e["depth"] for e in log), default=0),
             "root_bound": root_bound, "incumbent": best_obj,
             "mip_violation": mip.violation(x), "mccormick_error": mip.mccormick_error(x),
             "wall_time": time.perf_counter() - t0, "node_log": log}
    return make_result(spec, best_s, method="mip", project=False, solver_stats=stats,
                       certified=certified, gap=gap)


def optimize(spec: ProblemSpec, max_horizon: Optional[int] = DEFAULT_MAX_HORIZON,
             tol: float = 1e-7, node_limit: int = DEFAULT_NODE_LIMIT) -> DispatchResult:
    return branch_and_bound(build_mip(spec, max_horizon), tol=tol, node_limit=node_limit)
