"""Hypothesis strategies shared by the test modules."""
import numpy as np
from hypothesis import strategies as st

from gridres.battery import BatterySpec
from gridres.problem import ProblemSpec, SocBand, SocPenalty
from gridres.response import ResponseModel
from gridres.timeseries import ImbalanceSeries

finite = dict(allow_nan=False, allow_infinity=False)
STEPS = (1.0, 0.25, 1 / 12, 1 / 60)


@st.composite
def batteries(draw, eta=None):
    energy = draw(st.floats(1.0, 1000.0, **finite))
    c_ch = draw(st.floats(0.25, 4.0, **finite))
    c_dis = draw(st.floats(0.25, 4.0, **finite))
    if eta is None:
        eta_ch = draw(st.floats(0.8, 1.0, **finite))
        eta_dis = draw(st.floats(0.8, 1.0, **finite))
    else:
        eta_ch = eta_dis = eta
    lo = draw(st.floats(0.0, 0.3, **finite))
    hi = draw(st.floats(0.7, 1.0, **finite))
    return BatterySpec.from_c_rating(energy, c_ch, c_dis, eta_ch, eta_dis, soc_min=lo, soc_max=hi)


@st.composite
def series(draw, min_n=1, max_n=8, scale=None):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    scale = draw(st.floats(1.0, 500.0, **finite)) if scale is None else scale
    delta = rng.normal(0.0, scale, n)
    p_g = rng.uniform(100.0, 10000.0, n)
    return ImbalanceSeries(delta, p_g, draw(st.sampled_from(STEPS)))


@st.composite
def bands(draw):
    lo = draw(st.floats(0.05, 0.6, **finite))
    width = draw(st.floats(0.1, 0.9 - lo, **finite))
    return SocBand(lo, lo + width)


@st.composite
def problems(draw, max_n=6, variant=None, eta=None):
    """Random instance of one of the six formulations (index as in
    ``oracle.VARIANTS``)."""
    ser = draw(series(max_n=max_n))
    bt = draw(batteries(eta=eta))
    b0 = bt.b_min + draw(st.floats(0.0, 1.0, **finite)) * (bt.b_max - bt.b_min)
    v = draw(st.integers(0, 5)) if variant is None else variant
    cost = "quadratic" if v % 2 else "linear"
    eps = draw(st.floats(0.0, 0.05, **finite))
    pen = None
    if v >= 4:
        pen = SocPenalty(draw(st.floats(0.0, 100.0, **finite)), draw(bands()))
    return ProblemSpec(ser, bt, cost, v >= 2, ResponseModel(eps), pen, b0=b0)
