import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gridres import opt_convex
from gridres.battery import BatterySpec
from gridres.estimators import StorageDispatcher
from gridres.problem import ProblemSpec
from gridres.response import ResponseModel
from gridres.timeseries import ImbalanceSeries


def _X(n=24, seed=0):
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.normal(0, 80, n), np.full(n, 2000.0)])


def test_fit_transform_predict():
    X = _X()
    est = StorageDispatcher(energy_mwh=100.0, epsilon=0.01, cost="quadratic")
    r = est.fit_transform(X)
    s = est.predict(X)
    np.testing.assert_allclose(r, X[:, 0] + s, atol=1e-12)
    spec = ProblemSpec(ImbalanceSeries(X[:, 0], X[:, 1], 1.0), BatterySpec.from_c_rating(100.0),
                       "quadratic", True, ResponseModel(0.01), b0=50.0)
    assert est.result_.objective == pytest.approx(opt_convex.optimize(spec).objective, rel=1e-9)
    assert 0.0 < est.score(X) <= 100.0


def test_params_and_clone():
    est = StorageDispatcher(energy_mwh=10.0, method="alg2", epsilon=0.02)
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(energy_mwh=20.0)
    assert c.energy_mwh == 20.0 and est.energy_mwh == 10.0


def test_single_column_and_refit_on_new_series():
    est = StorageDispatcher(method="alg1", p_g=2000.0, energy_mwh=50.0)
    with pytest.raises(NotFittedError):
        est.transform(_X()[:, 0])
    est.fit(_X()[:, 0])
    other = _X(seed=1)
    # transform on a different series dispatches that series
    r = est.transform(other)
    assert r.shape == (24,) and not np.allclose(r, est.result_.residuals)
    with pytest.raises(ValueError):
        StorageDispatcher().fit(_X()[:, 0])
    with pytest.raises(ValueError):
        StorageDispatcher(method="magic").fit(_X())


def test_soc_band_methods():
    X = _X()
    a3 = StorageDispatcher(method="alg3", epsilon=0.01, soc_band=(0.4, 0.8)).fit(X)
    qs = StorageDispatcher(method="convex", cost="quadratic", epsilon=0.01, soc_band=(0.4, 0.8),
                           lam=5.0).fit(X)
    assert a3.result_.method == "alg3"
    assert qs.result_.method == "convex"
