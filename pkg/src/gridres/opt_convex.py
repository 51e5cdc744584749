"""Horizon dispatch via convex epigraph reformulations.

Every variant (linear or quadratic cost, with or without the response band,
with or without the SoC penalty) becomes one convex QP over the per-step
variables::

    c_i >= 0   charged energy          d_i >= 0   discharged energy
    b_i        stored energy           theta_i    imbalance hinge epigraph
    beta_i     SoC hinge epigraph (only with a SoC penalty)

with ``s_i = c_i - d_i`` and ``b_i = b_{i-1} + eta_ch c_i - d_i / eta_dis``.
Splitting ``s`` into ``c`` and ``d`` linearises the dynamics exactly whenever
``c_i * d_i = 0``; steps violating that are counted and reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .problem import DispatchResult, ProblemSpec, make_result
from .qp import NonConvergence, solve_qp

COMPLEMENTARITY_TOL = 1e-7
# relative slack on hinge caps in the throughput-minimising pass
CAP_SLACK = 1e-8


@dataclass
class EpigraphProgram:
    """QP data ``min 0.5 x'Px + q'x  s.t.  Ax = b, Gx <= h`` plus the variable map."""

    spec: ProblemSpec
    P: sp.csr_matrix
    q: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    index: dict
    restrictions: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.q.size

    @property
    def n_eq(self) -> int:
        return self.b.size

    @property
    def n_ineq(self) -> int:
        return self.h.size

    def objective(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.P @ x)) + float(self.q @ x)


def constraint_tally(n: int, soc_penalty: bool) -> tuple[int, int, int]:
    """Closed-form (variables, equalities, inequalities) of :func:`build`."""
    blocks = 5 if soc_penalty else 4
    return blocks * n, n, (12 if soc_penalty else 9) * n


class _Rows:
    """Accumulates sparse constraint rows in COO form."""

    def __init__(self, nx):
        self.nx = nx
        self.r, self.c, self.v, self.rhs = [], [], [], []
        self.m = 0

    def add(self, cols, vals, rhs):
        # cols/vals: lists of equally long index/coefficient arrays, one row per entry
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        k = rhs.size
        rows = np.arange(self.m, self.m + k)
        for col, val in zip(cols, vals):
            col = np.broadcast_to(np.asarray(col), (k,))
            val = np.broadcast_to(np.asarray(val, dtype=float), (k,))
            self.r.append(rows)
            self.c.append(col)
            self.v.append(val)
        self.rhs.append(rhs)
        self.m += k

    def matrix(self):
        if not self.r:
            return sp.csr_matrix((0, self.nx)), np.zeros(0)
        M = sp.coo_matrix((np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))),
                          shape=(self.m, self.nx)).tocsr()
        return M, np.concatenate(self.rhs)


def _restriction_sets(n, charge_off, discharge_off, sign):
    c_off = np.zeros(n, dtype=bool)
    d_off = np.zeros(n, dtype=bool)
    c_off[list(charge_off)] = True
    d_off[list(discharge_off)] = True
    sign = np.zeros(n, dtype=int) if sign is None else np.asarray(sign, dtype=int)
    if sign.shape != (n,):
        raise ValueError("sign must have one entry per step")
    return c_off, d_off, sign


def _storage_rows(rows, spec, ic, id_, ib, c_off, d_off, sign, eq=None):
    """Box bounds on (c, d, b) plus optional residual-sign rows.

    Variables listed in ``c_off``/``d_off`` are pinned to zero through
    equality rows in ``eq`` instead of their box rows."""
    n, h, bt = spec.n, spec.h, spec.battery
    fc, fd = ~c_off, ~d_off
    rows.add([ic[fc]], [1.0], np.full(fc.sum(), bt.delta_max * h))
    rows.add([ic[fc]], [-1.0], np.zeros(fc.sum()))
    rows.add([id_[fd]], [1.0], np.full(fd.sum(), -bt.delta_min * h))
    rows.add([id_[fd]], [-1.0], np.zeros(fd.sum()))
    rows.add([ib], [1.0], np.full(n, bt.b_max))
    rows.add([ib], [-1.0], np.full(n, -bt.b_min))
    if eq is not None:
        eq.add([ic[c_off]], [1.0], np.zeros(c_off.sum()))
        eq.add([id_[d_off]], [1.0], np.zeros(d_off.sum()))
    delta = spec.series.delta
    pos, neg = sign > 0, sign < 0
    # residual >= 0  <=>  -(c - d)/h <= delta ; residual <= 0  <=>  (c - d)/h <= -delta
    rows.add([ic[pos], id_[pos]], [-1.0 / h, 1.0 / h], delta[pos])
    rows.add([ic[neg], id_[neg]], [1.0 / h, -1.0 / h], -delta[neg])


def build(spec: ProblemSpec, charge_off=(), discharge_off=(), sign=None) -> EpigraphProgram:
    """Epigraph QP of ``spec``.

    ``charge_off``/``discharge_off`` pin ``c_i``/``d_i`` to zero and ``sign``
    (entries in {-1, 0, 1}) restricts the sign of the residual per step; these
    are how branch-and-bound nodes restrict the program.
    """
    n, h = spec.n, spec.h
    bt = spec.battery
    pen = spec.soc_penalty
    nblocks = 5 if pen is not None else 4
    idx = {name: np.arange(k * n, (k + 1) * n)
           for k, name in enumerate(("c", "d", "b", "theta", "beta")[:nblocks])}
    nx = nblocks * n
    ic, id_, ib, it = idx["c"], idx["d"], idx["b"], idx["theta"]
    delta = spec.series.delta
    e = spec.eps_pg
    c_off, d_off, sgn = _restriction_sets(n, charge_off, discharge_off, sign)

    eq = _Rows(nx)
    # b_i - b_{i-1} - eta_ch c_i + d_i/eta_dis = 0
    rhs = np.zeros(n)
    rhs[0] = spec.initial_energy
    eq.add([ib, ic, id_], [1.0, -bt.eta_ch, 1.0 / bt.eta_dis], rhs)
    ineq = _Rows(nx)
    _storage_rows(ineq, spec, ic, id_, ib, c_off, d_off, sgn, eq)
    A, b = eq.matrix()
    if n > 1:
        coupling = sp.coo_matrix((-np.ones(n - 1), (np.arange(1, n), ib[:-1])), shape=A.shape)
        A = (A + coupling).tocsr()

    # theta >= +-(delta + (c - d)/h) - e,  theta >= 0
    ineq.add([ic, id_, it], [1.0 / h, -1.0 / h, -1.0], e - delta)
    ineq.add([ic, id_, it], [-1.0 / h, 1.0 / h, -1.0], e + delta)
    ineq.add([it], [-1.0], np.zeros(n))
    if pen is not None:
        ibeta = idx["beta"]
        band = pen.band
        inv = 1.0 / bt.b_rated
        ineq.add([ib, ibeta], [inv, -1.0], np.full(n, band.soc_bar + band.gamma))
        ineq.add([ib, ibeta], [-inv, -1.0], np.full(n, band.gamma - band.soc_bar))
        ineq.add([ibeta], [-1.0], np.zeros(n))
    G, hv = ineq.matrix()

    q = np.zeros(nx)
    if spec.cost == "linear":
        P = sp.csr_matrix((nx, nx))
        q[it] = 1.0
        if pen is not None:
            q[idx["beta"]] = pen.lam
    elif pen is None:
        P = sp.coo_matrix((np.full(n, 2.0), (it, it)), shape=(nx, nx)).tocsr()
    else:
        # (theta + lam*beta)^2
        lam = pen.lam
        ibeta = idx["beta"]
        rows = np.concatenate([it, it, ibeta, ibeta])
        cols = np.concatenate([it, ibeta, it, ibeta])
        vals = np.concatenate([np.full(n, 2.0), np.full(n, 2 * lam), np.full(n, 2 * lam),
                               np.full(n, 2 * lam * lam)])
        P = sp.coo_matrix((vals, (rows, cols)), shape=(nx, nx)).tocsr()
    return EpigraphProgram(spec, P, q, A, b, G, hv, idx,
                           dict(charge_off=c_off, discharge_off=d_off, sign=sgn))


def _min_throughput(program: EpigraphProgram, x: np.ndarray, tol: float) -> np.ndarray:
    """Among (near-)optimal points, pick one with least charge+discharge.

    Each hinge is capped at its optimal value plus a small slack, which turns
    into plain bands on the residual (and SoC) over the variables (c, d, b);
    the LP ``min sum(c + d)`` over that set removes energy wasted by
    simultaneous charging and discharging unless the waste is what achieves
    the optimum.
    """
    spec = program.spec
    n, h, bt = spec.n, spec.h, spec.battery
    idx = program.index
    nx = 3 * n
    ic, id_, ib = np.arange(n), np.arange(n, 2 * n), np.arange(2 * n, 3 * n)
    theta = np.maximum(x[idx["theta"]], 0.0)
    width = spec.eps_pg + theta + CAP_SLACK * (1.0 + theta)
    rows = _Rows(nx)
    rr = program.restrictions
    _storage_rows(rows, spec, ic, id_, ib, rr["charge_off"], rr["discharge_off"], rr["sign"])
    delta = spec.series.delta
    rows.add([ic, id_], [1.0 / h, -1.0 / h], width - delta)
    rows.add([ic, id_], [-1.0 / h, 1.0 / h], width + delta)
    pen = spec.soc_penalty
    if pen is not None and pen.lam > 0:
        beta = np.maximum(x[idx["beta"]], 0.0)
        sw = pen.band.gamma + beta + CAP_SLACK * (1.0 + beta) / max(1.0, pen.lam)
        inv = 1.0 / bt.b_rated
        rows.add([ib], [inv], sw + pen.band.soc_bar)
        rows.add([ib], [-inv], sw - pen.band.soc_bar)
    G, hv = rows.matrix()
    keep = np.concatenate([idx["c"], idx["d"], idx["b"]])
    A = program.A[:, keep]
    q = np.concatenate([np.ones(2 * n), np.zeros(n)])
    res = solve_qp(None, q, A, program.b, G, hv, tol=tol, max_iter=150)
    out = x.copy()
    out[keep] = res.x
    return out


def solve_program(program: EpigraphProgram, tol: float = 1e-8, max_iter: int = 150,
                  polish: bool = True) -> tuple[np.ndarray, dict]:
    """Raw epigraph solution vector and solver statistics (see :func:`solve`)."""
    spec = program.spec
    res = solve_qp(program.P, program.q, program.A, program.b, program.G, program.h,
                   tol=tol, max_iter=max_iter)
    x = res.x
    stats = dict(res.stats)
    stats["program_objective"] = program.objective(x)
    stats["n_vars"] = program.n_vars
    if polish and _overlap(program, x) > 0:
        try:
            x = _min_throughput(program, x, tol)
            stats["polished"] = True
        except NonConvergence:
            stats["polished"] = False
    return x, stats


def solve(program: EpigraphProgram, tol: float = 1e-8, max_iter: int = 150,
          polish: bool = True) -> DispatchResult:
    """Solve the epigraph QP and rebuild an exactly feasible dispatch from it.

    The returned ``objective`` is recomputed from the action trajectory alone;
    the QP value is kept in ``solver_stats['program_objective']``.  With
    ``polish`` a second LP removes charge/discharge overlap that the optimum
    does not need (interior-point iterates sit in the middle of optimal faces).
    """
    x, stats = solve_program(program, tol, max_iter, polish)
    c = np.maximum(x[program.index["c"]], 0.0)
    d = np.maximum(x[program.index["d"]], 0.0)
    return make_result(program.spec, c - d, method="convex", solver_stats=stats,
                       complementarity_violations=_overlap(program, x))


def overlap_scale(spec: ProblemSpec) -> float:
    return max(1.0, spec.battery.delta_max * spec.h, -spec.battery.delta_min * spec.h)


def _overlap(program: EpigraphProgram, x: np.ndarray) -> int:
    """Steps charging and discharging at once (beyond a relative tolerance)."""
    c = x[program.index["c"]]
    d = x[program.index["d"]]
    return int(np.sum(np.minimum(c, d) > COMPLEMENTARITY_TOL * overlap_scale(program.spec)))


def optimize(spec: ProblemSpec, tol: float = 1e-8) -> DispatchResult:
    return solve(build(spec), tol=tol)
