import numpy as np
import pytest

from gridres import metrics
from gridres.response import ResponseModel, band, max_safe_imbalance, nadir
from gridres.timeseries import ImbalanceSeries


def test_nadir_examples():
    assert nadir(1000.0, 0.0, 50.0, 0.02) == pytest.approx(49.98)
    assert nadir(1000.0, 100.0, 50.0, 0.02) == pytest.approx(49.93)
    d1 = 50.0 - 0.02 - nadir(500.0, 100.0, 50.0, 0.02)
    d2 = 50.0 - 0.02 - nadir(1000.0, 100.0, 50.0, 0.02)
    assert d1 == pytest.approx(2 * d2)
    with pytest.raises(ValueError):
        nadir(0.0, 1.0, 50.0, 0.0)


def test_max_safe_imbalance():
    assert max_safe_imbalance(ResponseModel(0.0), 12345.0) == 0.0
    assert max_safe_imbalance(ResponseModel(0.005), 10000.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        max_safe_imbalance(ResponseModel(0.01), -1.0)


def test_band():
    s = ImbalanceSeries([0.0, 0.0], [8000.0, 8000.0], 1.0)
    lo, hi = band(ResponseModel(0.01), s)
    np.testing.assert_allclose(hi, [80.0, 80.0])
    np.testing.assert_array_equal(lo, -hi)
    s2 = ImbalanceSeries([0.0, 0.0], [1000.0, 3000.0], 1.0)
    np.testing.assert_allclose(band(ResponseModel(0.02), s2)[1], [20.0, 60.0])


def test_physical_derivation():
    m = ResponseModel(f0=50.0, f_db=0.02, delta_f_allow=0.2, mhc_per_pg=0.01)
    # the nadir at the tolerable imbalance sits exactly at the allowed excursion
    pg = 10000.0
    r = max_safe_imbalance(m, pg)
    assert nadir(m.mhc_per_pg * pg, r, 50.0, 0.02) == pytest.approx(50.0 - 0.2)
    scaled = ResponseModel(f0=50.0, f_db=0.02, delta_f_allow=0.2, mhc_per_pg=0.01)
    assert scaled.eps == m.eps
    with pytest.raises(ValueError):
        ResponseModel().eps
    with pytest.raises(ValueError):
        ResponseModel(epsilon=-0.1)


def test_in_band_residuals_cost_nothing():
    s = ImbalanceSeries([10.0, -30.0, 200.0], [1000.0] * 3, 1.0)
    rep = metrics.report(s, s.delta, epsilon=0.05)
    # only the last sample exceeds the 50 MW band
    assert rep.saidi_eps_mod == pytest.approx(150.0 / 1000.0)
