"""scikit-learn style wrappers around the dispatch solvers.

Dispatch learns nothing that carries over to a new series.  ``fit`` solves
the problem on ``X`` and keeps the result.  ``transform`` returns the
post-storage residuals and ``predict`` the dispatch ``s*``.  Both re-solve
when given a different series.  ``X`` is an ``(n, 2)`` array of
``[delta, p_g]`` columns in MW, or an ``(n,)`` / ``(n, 1)`` array of
imbalances with ``p_g`` taken from the constructor.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import myopic, opt_convex, opt_mccormick
from .battery import BatterySpec
from .problem import DispatchResult, ProblemSpec, SocBand, SocPenalty
from .response import ResponseModel
from .timeseries import ImbalanceSeries

SOLVERS = ("convex", "mip") + tuple(myopic.POLICIES)


class StorageDispatcher(TransformerMixin, BaseEstimator):
    """Battery dispatch as a transformer from imbalance to residual imbalance.

    Parameters
    ----------
    energy_mwh : float
        Rated energy capacity.
    c_charge, c_discharge : float
        Power limits as C-rates (1.0 = full charge in one hour).
    eta_ch, eta_dis : float
        One-way efficiencies.
    soc0 : float
        Initial state of charge as a fraction of rated energy.
    method : str
        ``"convex"``, ``"mip"`` or one of the myopic policies.
    cost : str
        ``"linear"`` or ``"quadratic"``.
    epsilon : float or None
        Tolerable imbalance fraction.  ``None`` solves the plain problem.
    soc_band : tuple or None
        Preferred ``(L, U)`` state-of-charge band.
    lam : float
        SoC penalty weight.  Used by the optimizers when ``soc_band`` is set.
    step_h : float
        Sample spacing in hours.
    p_g : float
        Scheduled generation (MW) when ``X`` has a single column.
    """

    def __init__(self, energy_mwh=100.0, c_charge=1.0, c_discharge=1.0, eta_ch=1.0,
                 eta_dis=1.0, soc0=0.5, method="convex", cost="linear", epsilon=None,
                 soc_band=None, lam=1.0, step_h=1.0, p_g=None):
        self.energy_mwh = energy_mwh
        self.c_charge = c_charge
        self.c_discharge = c_discharge
        self.eta_ch = eta_ch
        self.eta_dis = eta_dis
        self.soc0 = soc0
        self.method = method
        self.cost = cost
        self.epsilon = epsilon
        self.soc_band = soc_band
        self.lam = lam
        self.step_h = step_h
        self.p_g = p_g

    def _series(self, X) -> ImbalanceSeries:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] not in (1, 2):
            raise ValueError("X must have columns [delta] or [delta, p_g]")
        if X.shape[1] == 1:
            if self.p_g is None:
                raise ValueError("single-column X needs the p_g parameter")
            p_g = np.full(X.shape[0], float(self.p_g))
        else:
            p_g = X[:, 1]
        return ImbalanceSeries(X[:, 0].copy(), p_g.copy(), float(self.step_h))

    def _problem(self, X) -> ProblemSpec:
        bt = BatterySpec.from_c_rating(self.energy_mwh, self.c_charge, self.c_discharge,
                                       eta_ch=self.eta_ch, eta_dis=self.eta_dis)
        band = SocBand(*self.soc_band) if self.soc_band is not None else None
        aware = self.epsilon is not None or band is not None
        pen = SocPenalty(self.lam, band) if band is not None and self.method in ("convex", "mip") \
            else None
        return ProblemSpec(self._series(X), bt, self.cost, aware,
                           ResponseModel(self.epsilon or 0.0), pen, b0=self.soc0 * bt.b_rated)

    def _solve(self, X) -> DispatchResult:
        if self.method not in SOLVERS:
            raise ValueError(f"method must be one of {SOLVERS}")
        spec = self._problem(X)
        if self.method == "convex":
            return opt_convex.optimize(spec)
        if self.method == "mip":
            return opt_mccormick.optimize(spec)
        band = SocBand(*self.soc_band) if self.soc_band is not None else None
        return myopic.run_policy(self.method, spec, band=band)

    def fit(self, X, y=None):
        """Solve the dispatch problem on ``X``; ``y`` is ignored."""
        self.result_ = self._solve(X)
        self.X_fit_ = np.asarray(X, dtype=float).copy()
        self.dispatch_ = self.result_.s
        self.report_ = self.result_.report
        return self

    def _result_for(self, X) -> DispatchResult:
        check_is_fitted(self, "result_")
        X = np.asarray(X, dtype=float)
        if X.shape == self.X_fit_.shape and np.array_equal(X, self.X_fit_):
            return self.result_
        return self._solve(X)

    def transform(self, X):
        """Residual imbalance (MW) after the storage action."""
        return self._result_for(X).residuals

    def predict(self, X):
        """Per-step storage energy ``s*`` (MWh, positive = charging)."""
        return self._result_for(X).s

    def score(self, X, y=None):
        """Modified reliability index (percent) of the dispatched series."""
        return self._result_for(X).report.ri_eps_mod
