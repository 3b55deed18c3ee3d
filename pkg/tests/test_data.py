import datetime as dt
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imitation_portfolio.data import (
    DataError, PriceSeries, business_days, drift_standard_error, estimate_market_params,
    load_prices_csv, load_rates_csv, write_prices_csv)
from imitation_portfolio.errors import ContractError, DomainError
from imitation_portfolio.oracle import simulate_gbm_prices


def series(closes, start=dt.date(2000, 1, 3)):
    return PriceSeries(tuple(business_days(start, len(closes))), np.asarray(closes, float))


def test_three_rows():
    s = load_prices_csv(io.StringIO("date,close\n2020-01-02,10\n2020-01-03,10.5\n2020-01-06,10.2\n"))
    assert len(s) == 3 and not s.reordered and s.warnings == ()
    assert s.closes[1] == 10.5


def test_extra_columns_and_case_insensitive_header(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("Date,Open,Close\n2020-01-02,1,10\n2020-01-03,1,11\n")
    s = load_prices_csv(f)
    assert list(s.closes) == [10, 11]


def test_duplicate_date_rejected():
    with pytest.raises(DataError, match="2020-01-03") as err:
        load_prices_csv(io.StringIO("date,close\n2020-01-02,10\n2020-01-03,11\n2020-01-03,12\n"))
    assert err.value.line == 4


def test_out_of_order_sorted_with_warning():
    s = load_prices_csv(io.StringIO("date,close\n2020-01-06,3\n2020-01-02,1\n2020-01-03,2\n"))
    assert s.reordered
    assert list(s.closes) == [1, 2, 3]
    assert s.dates[0] == dt.date(2020, 1, 2)


@pytest.mark.parametrize("row,line", [("2020-13-01,5", 3), ("2020-01-03,abc", 3), ("2020-01-03", 3),
                                      ("2020-01-03,nan", 3)])
def test_malformed_rows_report_line(row, line):
    with pytest.raises(DataError) as err:
        load_prices_csv(io.StringIO(f"date,close\n2020-01-02,10\n{row}\n"))
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


@pytest.mark.parametrize("value", ["0", "-1.5"])
def test_non_positive_price(value):
    with pytest.raises(DataError, match="non-positive"):
        load_prices_csv(io.StringIO(f"date,close\n2020-01-02,{value}\n"))


@pytest.mark.parametrize("text", ["", "date,close\n", "date,close\n\n\n"])
def test_empty_file(text):
    with pytest.raises(DataError):
        load_prices_csv(io.StringIO(text))


def test_missing_column():
    with pytest.raises(DataError, match="close"):
        load_prices_csv(io.StringIO("date,price\n2020-01-02,1\n"))


def test_rates_file(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("date,rate\n2022-01-03,0.004\n2022-01-04,0.076\n")
    r = load_rates_csv(f)
    assert r.rates.tolist() == [0.004, 0.076]


def test_estimator_formulas():
    prices = series(100 * np.exp(np.cumsum(np.r_[0, np.tile([0.01, -0.005], 20)])))
    est = estimate_market_params(prices, [0.03, 0.05])
    x = np.tile([0.01, -0.005], 20)
    sigma = np.std(x, ddof=1) * math.sqrt(252)
    assert est.sigma_hat == pytest.approx(sigma, rel=1e-12)
    assert est.mu_hat == pytest.approx(np.mean(x) * 252 + sigma**2 / 2, rel=1e-12)
    assert est.r_hat == pytest.approx(0.04)
    assert est.v_hat == pytest.approx(est.mu_hat - 0.04, rel=1e-12)
    assert est.observations_used == 40


def test_gbm_round_trip(tmp_path):
    n = 12600
    closes = simulate_gbm_prices(0.07, 0.17, n, seed=2024)
    f = tmp_path / "gbm.csv"
    write_prices_csv(f, business_days(dt.date(1974, 1, 2), n + 1), closes)
    est = estimate_market_params(load_prices_csv(f), [0.04])
    assert abs(est.sigma_hat - 0.17) <= 0.05 * 0.17
    assert abs(est.mu_hat - 0.07) <= 2 * drift_standard_error(0.17, n)
    assert est.sample_span_years == pytest.approx(50, rel=0.05)


def test_constant_series_rejected():
    with pytest.raises(DomainError):
        estimate_market_params(series(np.full(40, 50.0)), [0.04])


def test_too_few_returns():
    with pytest.raises(ContractError):
        estimate_market_params(series(np.linspace(1, 2, 30)), [0.04])
    estimate_market_params(series(np.linspace(1, 2, 31)), [0.04])


def test_rates_required():
    with pytest.raises(ContractError):
        estimate_market_params(series(np.linspace(1, 2, 40)), [])


@given(st.floats(1e-3, 1e4))
def test_rescaling_invariance(scale):
    closes = simulate_gbm_prices(0.05, 0.2, 100, seed=5)
    a = estimate_market_params(series(closes), [0.02])
    b = estimate_market_params(series(closes * scale), [0.02])
    assert b.sigma_hat == pytest.approx(a.sigma_hat, rel=1e-9)
    assert b.mu_hat == pytest.approx(a.mu_hat, rel=1e-9, abs=1e-12)


def test_series_invariants():
    with pytest.raises(ContractError):
        PriceSeries((dt.date(2020, 1, 2), dt.date(2020, 1, 2)), np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        PriceSeries((dt.date(2020, 1, 2),), np.array([-1.0]))
