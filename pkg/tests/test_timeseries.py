import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridres.timeseries import (ImbalanceSeries, IngestionError, SynthModel, load_csv, resample,
                                synth, write_csv)
from strategies import series


def _write(path, text):
    path.write_text(text)
    return path


def test_load_three_rows_five_minute(tmp_path):
    f = _write(tmp_path / "a.csv", "time,delta,p_g\n"
               "2019-05-10 00:00,10,1000\n2019-05-10 00:05,-5,1000\n2019-05-10 00:10,0,1000\n")
    s = load_csv(f, col_time="time")
    assert s.n == 3
    assert s.step_h == pytest.approx(1 / 12, rel=1e-12)
    np.testing.assert_array_equal(s.delta, [10, -5, 0])
    np.testing.assert_array_equal(s.p_g, [1000] * 3)


def test_irregular_spacing_rejected(tmp_path):
    rows = ["time,delta,p_g"] + [f"2019-05-10 00:{m:02d},1,1000" for m in (0, 5, 10, 20, 25)]
    f = _write(tmp_path / "gap.csv", "\n".join(rows) + "\n")
    with pytest.raises(IngestionError, match="irregular spacing"):
        load_csv(f, col_time="time")
    # explicit step bypasses inference
    assert load_csv(f, col_time="time", step_h=1 / 12).n == 5


def test_six_days_five_minute_is_1728_samples(tmp_path):
    s = synth(6 * 24 * 12, SynthModel(step_h=1 / 12), seed=1)
    write_csv(s, tmp_path / "bpa.csv")
    back = load_csv(tmp_path / "bpa.csv", col_time="time")
    assert back.n == 1728
    assert back.step_h == s.step_h


def test_missing_values(tmp_path):
    f = _write(tmp_path / "m.csv", "delta,p_g\n1,100\n,100\n3,100\n")
    with pytest.raises(IngestionError, match="missing"):
        load_csv(f, step_h=1.0)
    s = load_csv(f, step_h=1.0, interpolate_gaps=True)
    np.testing.assert_array_equal(s.delta, [1, 2, 3])
    assert s.meta["interpolated"] == 1


def test_constant_pg_and_missing_column(tmp_path):
    f = _write(tmp_path / "c.csv", "delta\n1\n2\n")
    assert load_csv(f, col_pg=None, p_g_const=500.0, step_h=1.0).p_g.tolist() == [500, 500]
    with pytest.raises(IngestionError):
        load_csv(f, step_h=1.0)
    with pytest.raises(IngestionError):
        load_csv(f, col_delta="imb", p_g_const=1.0, step_h=1.0)
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv", step_h=1.0)


def test_negative_pg_rejected():
    with pytest.raises(IngestionError):
        ImbalanceSeries([1.0, 2.0], [1.0, -1.0], 1.0)
    with pytest.raises(IngestionError):
        ImbalanceSeries([1.0, np.nan], [1.0, 1.0], 1.0)
    with pytest.raises(IngestionError):
        ImbalanceSeries([1.0], [1.0], 0.0)


def test_resample_examples():
    s = ImbalanceSeries([2.0, 4.0, 6.0, 8.0], 10.0, 1.0)
    np.testing.assert_array_equal(resample(s, 2.0).delta, [3.0, 7.0])
    r3 = resample(s, 3.0)
    np.testing.assert_array_equal(r3.delta, [4.0])
    assert r3.step_h == 3.0
    assert resample(s, 1.0) == s
    with pytest.raises(ValueError):
        resample(s, 1.5)


@given(series(min_n=1, max_n=40), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=200)
def test_resample_composes(s, a, b):
    m = s.n // (a * b)
    if m == 0:
        return
    once = resample(s, s.step_h * a * b)
    twice = resample(resample(s, s.step_h * a), s.step_h * a * b)
    np.testing.assert_allclose(twice.delta[:m], once.delta[:m], rtol=1e-12, atol=1e-9)


def test_synth_degenerate_and_deterministic():
    z = synth(50, SynthModel(volatility=0.0, mean=0.0), seed=3)
    assert np.all(z.delta == 0)
    assert synth(100, seed=9) == synth(100, seed=9)
    assert synth(100, seed=9) != synth(100, seed=10)


def test_synth_spike_difference():
    base = SynthModel()
    spiked = SynthModel(spike_index=253, spike_mw=-2000.0)
    a, b = synth(44640, base, 5), synth(44640, spiked, 5)
    d = b.delta - a.delta
    assert d[253] == -2000.0
    assert np.count_nonzero(d) == 1


def test_synth_events_do_not_disturb_noise():
    quiet = synth(500, SynthModel(), 4)
    noisy = synth(500, SynthModel(event_rate=0.05, event_mw=300.0, event_len=2), 4)
    d = noisy.delta - quiet.delta
    assert set(np.round(np.unique(np.abs(d)), 9)) <= {0.0, 300.0, 600.0, 900.0}
    assert np.any(d != 0)


@given(series(min_n=1, max_n=30), st.booleans())
@settings(max_examples=100)
def test_csv_round_trip(tmp_path_factory, s, with_time):
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    write_csv(s, path, with_time=with_time)
    back = load_csv(path, col_time="time" if with_time else None,
                    step_h=None if with_time and s.n > 1 else s.step_h)
    assert back == s


def test_time_column_picked_up_by_name(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time,delta,p_g\n2020-01-01 00:00,1,100\n2020-01-01 00:15,2,100\n")
    assert load_csv(p).step_h == pytest.approx(0.25)
