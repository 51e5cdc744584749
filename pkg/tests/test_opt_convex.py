import numpy as np
import pytest

from gridres import myopic, opt_convex, oracle
from gridres.battery import BatterySpec
from gridres.problem import ProblemSpec, SocBand, SocPenalty
from gridres.response import ResponseModel
from gridres.timeseries import ImbalanceSeries


def _spec(delta, cost="linear", eps=None, pen=None, energy=100.0, b0=None, eta=1.0, step_h=1.0):
    ser = ImbalanceSeries(delta, 1000.0, step_h)
    bt = BatterySpec.from_c_rating(energy, eta_ch=eta, eta_dis=eta)
    return ProblemSpec(ser, bt, cost, eps is not None or pen is not None,
                       ResponseModel(eps or 0.0), pen, b0=b0)


@pytest.mark.parametrize("pen", [False, True])
def test_tally(pen):
    n = 7
    spec = _spec(np.ones(n), eps=0.01, pen=SocPenalty(1.0, SocBand(0.4, 0.8)) if pen else None)
    prog = opt_convex.build(spec)
    assert (prog.n_vars, prog.n_eq, prog.n_ineq) == opt_convex.constraint_tally(n, pen)
    assert prog.n_vars == (5 if pen else 4) * n


def test_perfect_tracking_is_free():
    spec = _spec([10.0, -20.0, 5.0], cost="quadratic", eps=0.01)
    res = opt_convex.optimize(spec)
    assert res.objective == pytest.approx(0.0, abs=1e-8)


def test_zero_imbalance():
    res = opt_convex.optimize(_spec(np.zeros(5)))
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(res.s, 0.0, atol=1e-6)
    # with a SoC penalty an empty battery drifts back toward the band, using
    # the free room inside the tolerable band (50 MW here)
    pen = SocPenalty(10.0, SocBand(0.4, 0.8))
    res = opt_convex.optimize(_spec(np.zeros(5), eps=0.05, pen=pen, b0=0.0))
    assert res.objective == pytest.approx(0.0, abs=1e-6)
    assert res.soc[-1] >= 0.4 - 1e-6


def test_matches_alg1_at_unit_efficiency():
    rng = np.random.default_rng(11)
    for _ in range(10):
        spec = _spec(rng.normal(0, 80, 24), b0=rng.uniform(0, 100))
        a = myopic.run_policy("alg1", spec).objective
        c = opt_convex.optimize(spec).objective
        assert c == pytest.approx(a, rel=1e-6, abs=1e-6)


def test_objective_audit_from_s():
    rng = np.random.default_rng(2)
    for k in range(12):
        spec = oracle.random_instance(rng, 10, k % 6)
        res = opt_convex.optimize(spec)
        assert res.objective == pytest.approx(spec.objective(res.s), rel=1e-8, abs=1e-10)


def test_no_overlap_without_waste_incentive():
    # unit efficiency and no SoC penalty: wasting energy cannot help
    rng = np.random.default_rng(5)
    for k in range(10):
        spec = _spec(rng.normal(0, 80, 12), cost=["linear", "quadratic"][k % 2], eps=0.01)
        assert opt_convex.optimize(spec).complementarity_violations == 0


def test_monotone_in_battery_size():
    rng = np.random.default_rng(8)
    delta = rng.normal(0, 100, 48)
    objs = [opt_convex.optimize(_spec(delta, cost="quadratic", eps=0.01, energy=e, b0=0.5 * e)).objective
            for e in (10, 50, 100, 400)]
    assert all(b <= a + 1e-6 * (1 + abs(a)) for a, b in zip(objs, objs[1:]))


def test_long_horizon_uses_sparse_path():
    rng = np.random.default_rng(1)
    spec = _spec(rng.normal(0, 100, 2000), cost="quadratic", eps=0.01, step_h=1 / 12)
    res = opt_convex.optimize(spec)
    assert res.solver_stats["iterations"] > 0
    assert res.objective == pytest.approx(spec.objective(res.s), rel=1e-8)
