import io
import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from finres.dataio import (
    TimeSeriesPanel,
    adf_critical_values,
    adf_test,
    align_monthly,
    describe,
    load_panel,
    log_diff,
    save_panel,
    standardize,
    write_describe_csv,
)
from finres.errors import ParseError, ValidationError

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# ---- load / save -------------------------------------------------------

def test_load_minimal_panel():
    p = load_panel(io.StringIO("date,x\n2020-01,1.0\n2020-02,2.0\n"))
    assert (p.T, p.k) == (2, 1)
    assert p.columns == ("x",)
    assert p.dates == ("2020-01", "2020-02")
    np.testing.assert_array_equal(p.column("x"), [1.0, 2.0])


def test_duplicate_date_is_reported_with_line():
    with pytest.raises(ParseError, match="duplicate date") as err:
        load_panel(io.StringIO("date,x\n2020-01,1\n2020-01,2\n"))
    assert err.value.line == 3


@pytest.mark.parametrize(
    "text, fragment, line, column",
    [
        ("date,x\n2020-01,1\n2020-02,abc\n", "non-numeric", 3, "x"),
        ("date,x,y\n2020-01,1\n", "expected 3 cells", 2, None),
        ("date,x\n2020/01,1\n", "unparseable date", 2, "date"),
        ("date,x,x\n2020-01,1,2\n", "duplicate column", 1, "x"),
        ("when,x\n2020-01,1\n", "first header cell", 1, None),
        ("date,x\n2020-01,\n", "non-numeric", 2, "x"),
    ],
)
def test_parse_errors_carry_location(text, fragment, line, column):
    with pytest.raises(ParseError, match=fragment) as err:
        load_panel(io.StringIO(text))
    assert err.value.line == line
    if column is not None:
        assert err.value.column == column


def test_gap_in_months_is_rejected():
    with pytest.raises(ValidationError):
        load_panel(io.StringIO("date,x\n2020-01,1\n2020-03,2\n"))


def test_schema_mismatch():
    with pytest.raises(ParseError, match="do not match"):
        load_panel(io.StringIO("date,x\n2020-01,1\n2020-02,2\n"), schema=["y"])


def test_comments_and_scientific_notation():
    p = load_panel(io.StringIO("# note\ndate,x\n2020-01,1e-3\n2020-02,-2.5E2\n"))
    np.testing.assert_array_equal(p.values[:, 0], [1e-3, -250.0])


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((24, 3)) * 10.0 ** rng.integers(-8, 8, (24, 3))
    dates = tuple(f"{2001 + i // 12}-{i % 12 + 1:02d}" for i in range(24))
    panel = TimeSeriesPanel(dates, ("a", "b", "c"), vals)
    path = tmp_path / "p.csv"
    save_panel(panel, path)
    back = load_panel(path)
    assert back.dates == panel.dates and back.columns == panel.columns
    assert back.values.tobytes() == panel.values.tobytes()
    save_panel(back, tmp_path / "q.csv")
    assert (tmp_path / "q.csv").read_bytes() == path.read_bytes()


def test_daily_input_is_averaged_by_month():
    text = "date,x\n2020-01-02,1\n2020-01-20,3\n2020-02-05,5\n"
    p = load_panel(io.StringIO(text))
    assert p.dates == ("2020-01", "2020-02")
    np.testing.assert_array_equal(p.column("x"), [2.0, 5.0])


def test_panel_invariants():
    with pytest.raises(ValidationError):
        TimeSeriesPanel(("2020-01",), ("x",), np.ones((1, 1)))
    with pytest.raises(ValidationError):
        TimeSeriesPanel(("2020-01", "2020-02"), ("x",), np.array([[1.0], [np.nan]]))
    with pytest.raises(ValidationError):
        TimeSeriesPanel(("2020-02", "2020-01"), ("x",), np.ones((2, 1)))


# ---- log_diff ---------------------------------------------------------------

def test_log_diff_examples():
    np.testing.assert_allclose(log_diff([1, math.e, math.e**2]), [1, 1], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(log_diff([5, 5, 5]), [0, 0])
    # ln(1.1) from its series 2*atanh(0.1/2.1), evaluated independently
    z = 0.1 / 2.1
    ln11 = 2 * sum(z ** (2 * i + 1) / (2 * i + 1) for i in range(12))
    assert log_diff([100, 110])[0] == pytest.approx(ln11, abs=1e-15)
    assert ln11 == pytest.approx(0.0953101798, abs=1e-10)


def test_log_diff_names_offending_index():
    with pytest.raises(ValidationError, match="index 2"):
        log_diff([1.0, 2.0, 0.0, 3.0])
    with pytest.raises(ValidationError):
        log_diff([1.0])


@given(arrays(float, st.integers(1, 60), elements=finite))
def test_log_diff_inverts_cumulated_exponentials(z):
    levels = np.exp(np.concatenate([[0.0], np.cumsum(z)]))
    np.testing.assert_allclose(log_diff(levels), z, rtol=0, atol=1e-12)


# ---- align_monthly ----------------------------------------------------------

def test_align_constant_and_two_point():
    labels, vals = align_monthly([f"2021-03-{d:02d}" for d in range(1, 29)], [3.0] * 28)
    assert labels == ["2021-03"] and vals[0] == 3.0
    labels, vals = align_monthly(["2021-03-01", "2021-03-15"], [1.0, 3.0])
    assert vals[0] == 2.0


def test_align_matches_groupby_oracle():
    rng = np.random.default_rng(11)
    start = np.datetime64("2022-01-01")
    days = [str(start + i) for i in range(90)]
    x = rng.standard_normal(90)
    groups = defaultdict(list)
    for d, v in zip(days, x):
        groups[d[:7]].append(v)
    labels, vals = align_monthly(days, x)
    assert labels == sorted(groups)
    for lab, v in zip(labels, vals):
        assert abs(v - math.fsum(groups[lab]) / len(groups[lab])) < 1e-12


def test_align_is_idempotent_on_monthly():
    dates = ["2020-11", "2020-12", "2021-01"]
    labels, vals = align_monthly(dates, [1.0, 2.0, 4.0])
    assert labels == dates
    np.testing.assert_array_equal(vals, [1.0, 2.0, 4.0])


def test_align_errors():
    with pytest.raises(ValidationError, match="no observations in month 2020-02"):
        align_monthly(["2020-01-05", "2020-03-05"], [1.0, 2.0])
    with pytest.raises(ValidationError, match="strictly increasing"):
        align_monthly(["2020-01-05", "2020-01-03"], [1.0, 2.0])


# ---- describe ---------------------------------------------------------------

def test_describe_two_points_and_constant():
    d = describe([0.0, 1.0])
    assert d.mean == 0.5
    assert d.sd == pytest.approx(0.7071067812, abs=1e-10)
    c = describe([2.0] * 30)
    assert (c.sd, c.skewness, c.kurtosis) == (0.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        describe([1.0])


def test_describe_normal_moments():
    from scipy import stats as sps

    x = np.random.default_rng(0).standard_normal(500)
    d = describe(x)
    assert abs(d.skewness) < 0.3 and abs(d.kurtosis) < 0.6
    assert d.skewness == pytest.approx(sps.skew(x, bias=True), abs=1e-12)
    assert d.kurtosis == pytest.approx(sps.kurtosis(x, fisher=True, bias=True), abs=1e-12)


def test_describe_mean_sd_against_two_pass_reference():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        x = rng.normal(rng.uniform(-100, 100), rng.uniform(0.1, 10), n)
        m = math.fsum(x) / n
        sd = math.sqrt(math.fsum((v - m) ** 2 for v in x) / (n - 1))
        d = describe(x, max_lag=0)
        assert abs(d.mean - m) <= 1e-12 * max(1.0, abs(m))
        assert abs(d.sd - sd) <= 1e-12 * max(1.0, sd)


# ---- ADF ---------------------------------------------------------------------

def test_adf_matches_statsmodels():
    from statsmodels.tsa.stattools import adfuller

    rng = np.random.default_rng(2)
    series = [
        np.cumsum(rng.standard_normal(300)),
        rng.standard_normal(250),
        np.cumsum(rng.standard_normal(200)) * 0.1 + np.sin(np.arange(200) / 5),
    ]
    for y in series:
        for trend in (False, True):
            ours = adf_test(y, max_lag=12, include_trend=trend)
            ref = adfuller(y, maxlag=12, regression="ct" if trend else "c", autolag="AIC")
            assert ours.statistic == pytest.approx(ref[0], abs=1e-9)
            assert ours.chosen_lag == ref[2]
            assert ours.nobs == ref[3]
            for level in ("1%", "5%", "10%"):
                assert ours.critical_values[level] == pytest.approx(ref[4][level], abs=1e-3)


def test_adf_critical_value_ordering_and_reject_flags():
    for n in (25, 100, 500):
        for trend in (False, True):
            cv = adf_critical_values(n, trend)
            assert cv["1%"] < cv["5%"] < cv["10%"]
    r = adf_test(np.random.default_rng(3).standard_normal(100))
    assert all(r.reject_at[k] == (r.statistic < v) for k, v in r.critical_values.items())


def test_adf_stationary_ar_rejects_at_one_percent():
    rng = np.random.default_rng(4)
    e = rng.standard_normal(500)
    y = np.zeros(500)
    for t in range(1, 500):
        y[t] = 0.5 * y[t - 1] + e[t]
    assert adf_test(y).reject_at["1%"]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1e3, 1e3))
def test_adf_invariant_to_level_shift(seed, c):
    y = np.cumsum(np.random.default_rng(seed).standard_normal(80))
    a = adf_test(y, max_lag=4)
    b = adf_test(y + c, max_lag=4)
    assert a.chosen_lag == b.chosen_lag
    assert abs(a.statistic - b.statistic) < 1e-9 * max(1.0, abs(a.statistic))


def test_adf_too_short():
    with pytest.raises(ValidationError, match="too short"):
        adf_test(np.arange(20.0), max_lag=12)


# ---- standardize --------------------------------------------------------------

def test_standardize_examples():
    np.testing.assert_allclose(standardize([0.0, 1.0]), [-math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)
    z = standardize(np.random.default_rng(6).standard_normal(50))
    np.testing.assert_allclose(standardize(z), z, rtol=0, atol=1e-12)
    with pytest.raises(ValidationError):
        standardize([3.0, 3.0, 3.0])


@given(arrays(float, st.integers(3, 40), elements=finite), st.floats(0.1, 50), st.floats(-100, 100))
def test_standardize_affine_invariance(x, a, b):
    if np.std(x) < 1e-3:
        return
    base = standardize(x)
    np.testing.assert_allclose(standardize(a * x + b), base, atol=1e-8)
    np.testing.assert_allclose(standardize(-a * x + b), -base, atol=1e-8)


# ---- describe CSV ----------------------------------------------------------------

def test_describe_csv_schema_stars_and_determinism():
    rng = np.random.default_rng(8)
    dates = tuple(f"{2000 + i // 12}-{i % 12 + 1:02d}" for i in range(120))
    panel = TimeSeriesPanel(dates, ("noise", "walk"),
                            np.column_stack([rng.standard_normal(120), np.cumsum(rng.standard_normal(120))]))
    out1, out2 = io.StringIO(), io.StringIO()
    write_describe_csv(panel, out1)
    write_describe_csv(panel, out2)
    assert out1.getvalue() == out2.getvalue()
    lines = out1.getvalue().splitlines()
    assert lines[0] == "series,mean,sd,skewness,kurtosis,adf,lag"
    assert len(lines) == 3
    for line, name in zip(lines[1:], panel.columns):
        cell = line.split(",")[5]
        r = adf_test(panel.column(name))
        expected = "***" if r.reject_at["1%"] else "**" if r.reject_at["5%"] else "*" if r.reject_at["10%"] else ""
        assert cell == f"{r.statistic:.4f}{expected}"
        assert line.split(",")[6] == str(r.chosen_lag)
