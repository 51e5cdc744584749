"""Primal-dual interior-point solver for convex quadratic programs.

Solves::

    minimize    0.5 x'Px + q'x
    subject to  A x  = b
                G x <= h

with Mehrotra's predictor-corrector scheme from an infeasible start.  Small
problems use dense LU factorizations of the augmented KKT system; large ones
a sparse LU of the same (quasi-definite, regularised) matrix.  The iteration is
fully deterministic.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

DENSE_LIMIT = 1000
REFINE_STEPS = 2
STEP_FRACTION = 0.99


class NonConvergence(RuntimeError):
    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats or {}


class Infeasible(RuntimeError):
    pass


@dataclass
class QPResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective: float
    iterations: int
    stats: dict = field(default_factory=dict)


def _as_matrix(M, shape, dense):
    if M is None:
        M = sp.csr_matrix(shape)
    if dense:
        return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    return sp.csr_matrix(M)


def solve_qp(P, q, A, b, G, h, tol: float = 1e-8, max_iter: int = 100,
             reg: float = 1e-10, dense=None, acceptable_tol: float = 1e-5) -> QPResult:
    """Minimise a convex QP; raise :class:`NonConvergence` on failure.

    ``tol`` bounds the scaled primal residual, dual residual and duality
    gap.  When the iteration stalls short of ``tol`` (step lengths collapse on
    degenerate problems) the best iterate is returned if it meets
    ``acceptable_tol``.  Pass ``P=None`` for a linear program.
    """
    t0 = time.perf_counter()
    q = np.asarray(q, dtype=float)
    nx = q.size
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float)
    neq, m = b.size, h.size
    if dense is None:
        dense = nx + neq + m <= DENSE_LIMIT
    P = _as_matrix(P, (nx, nx), dense)
    A = _as_matrix(A, (neq, nx), dense)
    G = _as_matrix(G, (m, nx), dense)
    GT = G.T if dense else sp.csr_matrix(G.T)
    AT = A.T if dense else sp.csr_matrix(A.T)

    scale_q = 1.0 + np.max(np.abs(q), initial=0.0)
    scale_b = 1.0 + np.max(np.abs(b), initial=0.0)
    scale_h = 1.0 + np.max(np.abs(h), initial=0.0)

    perm = []
    nk = nx + neq + m

    def kkt_factor(d, boost=1.0):
        """Factor the augmented system with ``-d = -s/z`` on the constraint
        diagonal.  Forming ``G' diag(z/s) G`` instead would mix entries that
        span the whole range of z/s and lose the direction to cancellation."""
        r = boost * reg
        if dense:
            # primal shift relative to each diagonal entry: elimination can
            # cancel a pivot down to rounding noise of its own magnitude
            rx = r * (1.0 + np.abs(np.diag(P)) + (np.abs(G) ** 2).sum(axis=0))
            K0 = np.zeros((nk, nk))
            K0[:nx, :nx] = P
            K0[:nx, nx:nx + neq] = AT
            K0[:nx, nx + neq:] = GT
            K0[nx:nx + neq, :nx] = A
            K0[nx + neq:, :nx] = G
            K0[nx + neq:, nx + neq:][np.diag_indices(m)] = -d
            K = K0.copy()
            K[np.diag_indices(nk)] += np.concatenate([rx, np.full(neq + m, -r)])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu = sla.lu_factor(K, check_finite=False)
            solve = lambda rhs: sla.lu_solve(lu, rhs, check_finite=False)
        else:
            rx = r * (1.0 + np.abs(P.diagonal()) + np.asarray(G.multiply(G).sum(axis=0)).ravel())
            K0 = sp.bmat([[P, AT, GT], [A, None, None], [G, None, -sp.diags(d)]], format="csr")
            K = (K0 + sp.diags(np.concatenate([rx, np.full(neq + m, -r)]))).tocsr()
            # a bandwidth-reducing symmetric ordering keeps fill linear in the
            # horizon for time-coupled programs; the pattern never changes
            if not perm:
                pattern = abs(K0) + sp.identity(nk)
                perm.append(csgraph.reverse_cuthill_mckee(pattern.tocsr(), symmetric_mode=True))
            p = perm[0]
            lu = spla.splu(K[p][:, p].tocsc(), permc_spec="NATURAL",
                           options={"SymmetricMode": True}, diag_pivot_thresh=0.0)
            inv = np.empty_like(p)
            inv[p] = np.arange(p.size)

            def solve(rhs, lu=lu, p=p, inv=inv):
                return lu.solve(rhs[p])[inv]
        # K0 is the unregularised operator for iterative refinement
        return solve, K0

    def solve_newton(solve, K, rd, rp, rg, rc, s, z):
        # eliminate ds = (-rc - s*dz)/z from  z ds + s dz = -rc
        rhs = np.concatenate([-rd, -rp, -rg + rc / z])
        sol = solve(rhs)
        # iterative refinement against the regularisation
        for _ in range(REFINE_STEPS):
            sol = sol + solve(rhs - K @ sol)
        dx, dy, dz = sol[:nx], sol[nx:nx + neq], sol[nx + neq:]
        ds = (-rc - s * dz) / z
        return dx, dy, ds, dz

    def max_step(v, dv):
        neg = dv < 0
        if not np.any(neg):
            return 1.0
        return min(1.0, float(np.min(-v[neg] / dv[neg])))

    # initial point: least-squares fit of the constraints, then shift slacks
    solve0, _ = kkt_factor(np.ones(m))
    sol0 = solve0(np.concatenate([-q, b, h]))
    x = sol0[:nx]
    y = np.zeros(neq)
    s = h - G @ x
    s = np.maximum(s, 1.0)
    z = np.ones(m)
    if m:
        mu0 = max(float(s @ z) / m, 1.0)
        z = z * mu0 / np.mean(s)

    stats = {}
    best = None
    stalled = 0
    for it in range(1, max_iter + 1):
        Px = P @ x
        rd = Px + q + AT @ y + GT @ z
        rp = A @ x - b
        rg = G @ x + s - h
        gap = float(s @ z)
        mu = gap / m if m else 0.0
        pobj = 0.5 * float(x @ Px) + float(q @ x)
        res_p = max(np.max(np.abs(rp), initial=0.0) / scale_b, np.max(np.abs(rg), initial=0.0) / scale_h)
        res_d = np.max(np.abs(rd), initial=0.0) / scale_q
        rel_gap = gap / max(1.0, abs(pobj))
        stats = {"iterations": it - 1, "primal_residual": res_p, "dual_residual": res_d,
                 "gap": rel_gap}
        merit = max(res_p, res_d, rel_gap)
        if not np.isfinite([res_p, res_d, rel_gap]).all():
            # builtin max() lets a NaN through as if converged
            break
        if merit <= tol:
            stats["wall_time"] = time.perf_counter() - t0
            return QPResult(x, y, z, pobj, it - 1, stats)
        if best is None or merit < 0.5 * best[0]:
            best = (merit, x, y, z, pobj, dict(stats))
            stalled = 0
        elif best[0] <= acceptable_tol:
            stalled += 1
            if stalled >= 5:
                break

        ok = False
        for boost in (1.0, 1e3, 1e6):
            # an exactly singular pivot raises (sparse) or yields non-finite
            # directions (dense); retry with heavier regularisation
            try:
                with np.errstate(all="ignore"):
                    solve, K = kkt_factor(s / z, boost)
                    # predictor
                    dx, dy, ds, dz = solve_newton(solve, K, rd, rp, rg, s * z, s, z)
            except (RuntimeError, np.linalg.LinAlgError):
                continue
            if np.all(np.isfinite(dx)) and np.all(np.isfinite(dz)):
                ok = True
                break
        if not ok:
            break
        alpha = min(max_step(s, ds), max_step(z, dz))
        mu_aff = float((s + alpha * ds) @ (z + alpha * dz)) / m if m else 0.0
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        rc = s * z + ds * dz - sigma * mu
        with np.errstate(all="ignore"):
            dx, dy, ds, dz = solve_newton(solve, K, rd, rp, rg, rc, s, z)
        alpha = min(1.0, STEP_FRACTION * min(max_step(s, ds), max_step(z, dz)))
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)

    if best is not None and best[0] <= acceptable_tol:
        merit, x, y, z, pobj, stats = best
        stats["wall_time"] = time.perf_counter() - t0
        stats["stalled"] = True
        return QPResult(x, y, z, pobj, stats["iterations"], stats)
    stats["wall_time"] = time.perf_counter() - t0
    raise NonConvergence(f"interior point did not converge in {max_iter} iterations", stats)


def feasibility_margin(A, b, G, h, dense=None) -> float:
    """Smallest uniform relaxation ``t >= 0`` of ``G x <= h`` that makes the
    constraints feasible (phase-one LP).  Zero means feasible."""
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    nx = (A.shape[1] if A is not None else G.shape[1])
    m = h.size
    spA = sp.csr_matrix(A) if A is not None else sp.csr_matrix((0, nx))
    A1 = sp.hstack([spA, sp.csr_matrix((spA.shape[0], 1))])
    G1 = sp.vstack([sp.hstack([sp.csr_matrix(G), -np.ones((m, 1))]),
                    sp.hstack([sp.csr_matrix((1, nx)), -np.ones((1, 1))])])
    h1 = np.concatenate([h, [0.0]])
    q1 = np.zeros(nx + 1)
    q1[-1] = 1.0
    res = solve_qp(None, q1, A1, b, G1, h1, tol=1e-9, max_iter=150, dense=dense)
    return float(res.x[-1])
