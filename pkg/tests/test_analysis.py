import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sparsescale.analysis import (
    RegressionResult,
    SeriesFormatError,
    SparsenessRecord,
    assemble_timeseries,
    autocorrelation,
    centered_moving_average,
    default_window,
    diffusion_scale,
    dominant_period,
    filter_cyclic,
    filter_records,
    format_uncertainty,
    ingest_external_series,
    loglog_regression,
    measure_snapshot,
    parse_uncertainty,
    write_plot_csv,
    write_series_csv,
)
from sparsescale.field import GridSpec
from sparsescale.snapshot import FieldSnapshot
from sparsescale.synthetic import ball_field

SLOPE, INTERCEPT = 1.098, 2.17


def _records(d, r, t=None):
    t = np.arange(len(d), dtype=float) if t is None else t
    return [SparsenessRecord(float(ti), 1.0, float(di), float(ri), 0.5)
            for ti, di, ri in zip(t, d, r)]


# --- diffusion scale ---

def test_diffusion_scale_examples():
    assert diffusion_scale(1.0, 1.0) == 1.0
    assert diffusion_scale(1 / 3 * 1e-4, 100.0) == pytest.approx(5.7735e-4, rel=1e-4)
    assert diffusion_scale(0.2, 4.0) == pytest.approx(diffusion_scale(0.2, 1.0) / 2)
    assert diffusion_scale(2.0, 3.0) == pytest.approx(math.sqrt(2) * diffusion_scale(1.0, 3.0))


def test_diffusion_scale_errors():
    with pytest.raises(ValueError, match="degenerate: quiescent field"):
        diffusion_scale(1.0, 0.0)
    with pytest.raises(ValueError):
        diffusion_scale(0.0, 1.0)


# --- regression ---

def test_exact_power_law_recovered():
    d = np.geomspace(1e-3, 1e-1, 50)
    res = loglog_regression(_records(d, np.exp(INTERCEPT) * d**SLOPE))
    assert abs(res.slope - SLOPE) < 1e-12
    assert abs(res.intercept - INTERCEPT) < 1e-12
    assert res.slope_stderr < 1e-12 and res.r_squared == pytest.approx(1.0)
    assert res.intercept_log10 == pytest.approx(INTERCEPT / math.log(10))


def test_constant_r_gives_zero_slope():
    d = np.geomspace(0.01, 1, 10)
    res = loglog_regression(d=d, r=np.full(10, 0.3))
    assert res.slope == pytest.approx(0.0, abs=1e-14)
    assert res.r_squared == 1.0


def test_regression_matches_scipy(rng):
    d = np.geomspace(0.01, 1, 40)
    r = 0.5 * d**1.3 * np.exp(0.05 * rng.standard_normal(40))
    ours = loglog_regression(d=d, r=r)
    ref = stats.linregress(np.log(d), np.log(r))
    assert ours.slope == pytest.approx(ref.slope, rel=1e-12)
    assert ours.intercept == pytest.approx(ref.intercept, rel=1e-12)
    assert ours.slope_stderr == pytest.approx(ref.stderr, rel=1e-10)
    assert ours.intercept_stderr == pytest.approx(ref.intercept_stderr, rel=1e-10)
    assert ours.r_squared == pytest.approx(ref.rvalue**2, rel=1e-12)


def test_regression_errors():
    with pytest.raises(ValueError, match="at least 3"):
        loglog_regression(d=[1, 2], r=[1, 2])
    with pytest.raises(ValueError, match="degenerate abscissa"):
        loglog_regression(d=[1, 1, 1], r=[1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.01, 100), seed=st.integers(0, 1000))
def test_regression_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    d = np.geomspace(0.01, 1, 20)
    r = d**1.2 * np.exp(0.1 * rng.standard_normal(20))
    base = loglog_regression(d=d, r=r)
    sr = loglog_regression(d=d, r=c * r)
    assert sr.slope == pytest.approx(base.slope, rel=1e-9, abs=1e-9)
    assert sr.intercept == pytest.approx(base.intercept + math.log(c), abs=1e-9)
    sd = loglog_regression(d=c * d, r=r)
    assert sd.slope == pytest.approx(base.slope, rel=1e-9, abs=1e-9)
    assert sd.intercept == pytest.approx(base.intercept - base.slope * math.log(c), abs=1e-8)


def test_noisy_slope_coverage():
    d = np.geomspace(1e-3, 1e-1, 100)
    hits = 0
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(0, 0.01, d.size)
        res = loglog_regression(d=d, r=np.exp(INTERCEPT) * d**SLOPE * (1 + noise))
        hits += abs(res.slope - SLOPE) <= 3 * res.slope_stderr
    assert hits >= 95


def test_supercritical_slope_detected():
    d = np.geomspace(1e-3, 1e-1, 50)
    for seed in range(20):
        noise = np.random.default_rng(seed).normal(0, 0.01, d.size)
        res = loglog_regression(d=d, r=d**1.05 * (1 + noise))
        assert res.slope - 1 > 2 * res.slope_stderr


def test_result_serialization():
    res = RegressionResult(1.098, 2.17, 0.009, 0.04, 10, 0.99)
    out = res.to_dict()
    assert out["log_base"] == "e"
    assert out["summary"] == "fit = 1.098(9) * log(d) + 2.17(4)"


# --- uncertainty notation ---

@pytest.mark.parametrize("text, value, unc", [
    ("1.098(9)", 1.098, 0.009), ("2.17(4)", 2.17, 0.04), ("6.1(1.6)", 6.1, 1.6),
    ("1.7(6)", 1.7, 0.6), ("123(14)", 123.0, 14.0),
])
def test_uncertainty_roundtrip(text, value, unc):
    assert parse_uncertainty(text) == (value, unc)
    assert format_uncertainty(value, unc) == text


def test_parse_uncertainty_rejects():
    with pytest.raises(ValueError):
        parse_uncertainty("1.098 +- 0.009")


# --- cyclic filter ---

def test_sinusoid_plus_trend_recovers_trend():
    t = np.arange(240, dtype=float)
    trend = 0.02 * t + 1.0
    res = filter_cyclic(trend + 0.8 * np.sin(2 * np.pi * t / 16), t)
    assert res.detected and res.period == 16
    core = slice(16, -16)
    rms = np.sqrt(np.mean((res.values[core] - trend[core]) ** 2))
    assert rms <= 0.02 * np.sqrt(np.mean(trend[core] ** 2))


def test_given_period_override():
    t = np.arange(120, dtype=float)
    x = np.sin(2 * np.pi * t / 10)
    res = filter_cyclic(x, period=10)
    assert res.period == 10 and np.max(np.abs(res.values)) < 1e-12
    with pytest.raises(ValueError):
        filter_cyclic(x, period=1)


def test_constant_series_unchanged():
    res = filter_cyclic(np.full(30, 2.5))
    assert not res.detected and res.flag == "no cyclic component detected"
    assert np.array_equal(res.values, np.full(30, 2.5))


def test_white_noise_rarely_flagged():
    flagged = sum(filter_cyclic(np.random.default_rng(s).standard_normal(256)).detected
                  for s in range(100))
    assert flagged <= 10


def test_filter_idempotent():
    t = np.arange(200, dtype=float)
    x = 0.01 * t + np.sin(2 * np.pi * t / 12) + 0.3 * np.cos(2 * np.pi * t / 6)
    once = filter_cyclic(x)
    twice = filter_cyclic(once.values, period=once.period)
    amp0 = np.ptp(once.seasonal)
    assert np.ptp(twice.seasonal) < 0.05 * amp0


def test_filter_preconditions():
    with pytest.raises(ValueError, match="at least 8"):
        filter_cyclic(np.arange(5.0))
    with pytest.raises(ValueError, match="uniformly"):
        filter_cyclic(np.arange(10.0), times=np.r_[0.0, np.cumsum(np.arange(1, 10.0))])


def test_moving_average_even_period():
    x = np.arange(20, dtype=float)
    ma = centered_moving_average(x, 4)
    assert np.isnan(ma[:2]).all() and np.isnan(ma[-2:]).all()
    assert np.allclose(ma[2:-2], x[2:-2])


def test_acf_and_period():
    t = np.arange(100)
    acf = autocorrelation(np.sin(2 * np.pi * t / 20), 50)
    assert acf[0] == pytest.approx(1.0)
    assert dominant_period(np.sin(2 * np.pi * t / 20))[0] == 20


def test_filter_records_reduces_stderr():
    t = np.arange(96, dtype=float)
    d = np.geomspace(0.05, 0.01, t.size)
    r = 2.0 * d**1.5 * np.exp(0.3 * np.sin(2 * np.pi * t / 12))
    recs = _records(d, r, t)
    before = loglog_regression(recs)
    filtered, info = filter_records(recs)
    after = loglog_regression(filtered)
    assert info["r"].detected and info["r"].period == 12
    assert after.slope_stderr < before.slope_stderr
    assert after.slope == pytest.approx(1.5, abs=0.05)
    with pytest.raises(ValueError):
        filter_records(recs, columns=("t",))


# --- CSV ---

def test_csv_roundtrip(tmp_path, rng):
    recs = [SparsenessRecord(float(i) / 3, *rng.random(3).tolist(), 0.5) for i in range(5)]
    write_series_csv(recs, tmp_path / "a.csv")
    back = ingest_external_series(tmp_path / "a.csv")
    assert back == recs
    write_series_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_with_oracle_column(tmp_path):
    recs = [SparsenessRecord(0.0, 1.0, 0.1, 0.2, 0.5, 0.21)]
    write_series_csv(recs, tmp_path / "a.csv")
    assert ingest_external_series(tmp_path / "a.csv")[0].r_oracle == 0.21


def test_csv_three_rows(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,omega_max,d,r,lambda\n0,1,0.1,0.2,0.5\n1,2,0.07,0.1,0.5\n2,3,0.05,0.08,0.5\n")
    assert len(ingest_external_series(p)) == 3


def test_csv_drops_nonpositive_r(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,omega_max,d,r,lambda\n0,1,0.1,0,0.5\n1,2,0.07,0.1,0.5\n")
    with pytest.warns(UserWarning, match="line 2"):
        recs = ingest_external_series(p)
    assert len(recs) == 1


def test_csv_malformed_rows_listed(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,omega_max,d,r,lambda\n0,1,0.1,0.2,0.5\n1,x,0.1,0.2,0.5\n2,1,0.1\n")
    with pytest.raises(SeriesFormatError) as exc:
        ingest_external_series(p)
    assert [ln for ln, _ in exc.value.errors] == [3, 4]
    assert "line 3" in str(exc.value)


def test_csv_bad_header(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SeriesFormatError, match="header"):
        ingest_external_series(p)


def test_plot_csv():
    d = np.geomspace(0.01, 0.1, 5)
    recs = _records(d, d**2)
    text = write_plot_csv(recs, loglog_regression(recs))
    rows = [list(map(float, ln.split(","))) for ln in text.strip().splitlines()[1:]]
    assert np.allclose([r[1] for r in rows], [r[2] for r in rows])


# --- window and assembly ---

def test_default_window_half_crossing():
    t = np.arange(10.0)
    w = np.array([5, 4, 1, 2, 3, 6, 8, 10, 7, 3], float)
    assert default_window(t, w) == (4.0, 7.0)


def test_default_window_falls_back_to_minimum():
    t = np.arange(6.0)
    w = np.array([8, 6, 5, 7, 9, 8], float)
    assert default_window(t, w) == (2.0, 4.0)


def test_default_window_skips_initial_slump():
    # largest value at t=0, then a slump and a smaller burst
    t = np.arange(8.0)
    w = np.array([9, 6, 4, 5, 6, 7, 5, 4], float)
    assert default_window(t, w) == (2.0, 5.0)


def test_default_window_without_burst():
    with pytest.raises(ValueError, match="no burst"):
        default_window(np.arange(4.0), [4.0, 3.0, 2.0, 1.0])


def _ball_snapshot(g, time=0.0, radius=0.4, sign=1.0):
    # omega_y = 1 at the center, exactly 0.5 on the sphere of the given radius
    s = ball_field(g, radius)
    bump = np.where(s > 0, 0.5 + 0.5 * s / radius, np.clip(0.5 * (1 + s), 0, None))
    zero = np.zeros(g.shape)
    return FieldSnapshot(g, time, 1e-3, {"omega_x": zero, "omega_y": sign * bump, "omega_z": zero})


def test_ball_snapshot_record():
    g = GridSpec(64)
    rec = measure_snapshot(_ball_snapshot(g, sign=-1.0), lam=0.5, oracle=True)
    assert rec.omega_max == pytest.approx(1.0)
    assert rec.d == diffusion_scale(1e-3, rec.omega_max)
    assert rec.r == pytest.approx(0.4, abs=g.spacing)
    assert rec.r_oracle == pytest.approx(rec.r, abs=g.spacing)


def test_assemble_identical_snapshots_and_window():
    g = GridSpec(32)
    snaps = [_ball_snapshot(g, t) for t in (0.0, 1.0, 2.0)]
    recs = assemble_timeseries(snaps, 0.5)
    assert recs[0].r == recs[1].r == recs[2].r
    assert [r.t for r in assemble_timeseries(snaps, 0.5, window=(0.5, 2.0))] == [1.0, 2.0]
    with pytest.raises(ValueError):
        assemble_timeseries(snaps, 1.5)


def test_empty_superlevel_set_dropped():
    g = GridSpec(16)
    fields = {k: np.zeros(g.shape) for k in ("omega_x", "omega_y", "omega_z")}
    with pytest.warns(UserWarning, match="record dropped"):
        recs = assemble_timeseries([FieldSnapshot(g, 0.0, 1e-3, fields)], 0.5)
    assert recs == []


def test_magnitude_sets_merge_touching_components(grid32):
    # omega_x and omega_y balls side by side: two component RIVs, one magnitude RIV
    g = grid32
    c = np.full(3, np.pi)
    om = np.zeros((3,) + g.shape)
    om[0] = np.clip(ball_field(g, 0.6, c - [0.25, 0, 0]), 0, None)
    om[1] = np.clip(ball_field(g, 0.6, c + [0.25, 0, 0]), 0, None)
    snap = FieldSnapshot(g, 0.0, 1e-3, {"omega_x": om[0], "omega_y": om[1], "omega_z": om[2]})
    comp = measure_snapshot(snap, lam=0.5, refine_levels=1)
    mag = measure_snapshot(snap, lam=0.5, refine_levels=1, sets="magnitude", oracle=True)
    assert comp.d == mag.d
    # one merged RIV, still a union of two balls of radius 0.3
    assert abs(comp.r - 0.3) <= g.spacing
    assert abs(mag.r - 0.3) <= g.spacing
    assert abs(mag.r - mag.r_oracle) <= g.spacing
    with pytest.raises(ValueError, match="sets"):
        measure_snapshot(snap, sets="vector")
