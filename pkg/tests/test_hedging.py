"""Hedge simulations: zero initial value, neutrality, aggregation, reports."""

import csv
import datetime as dt
import math

import pytest

from gpvol.blackscholes import PricingInputs, bs_price, greeks, implied_vol
from gpvol.gptree import parse_tree
from gpvol.hedging import (GP_VOL_FLOOR, DegenerateHedgeError, HedgePath,
                           OptionHedgeResult, VolSource, build_paths,
                           build_report, hedge_factors, resample, run_delta,
                           simulate_delta, simulate_delta_gamma,
                           simulate_delta_vega, tracking_error,
                           write_report_csv)
from gpvol.synthmarket import MarketSpec, generate_quotes

BS = VolSource.black_scholes()
FLAT_TREE = VolSource.from_tree(parse_tree("0.2"))


def flat_path(n=4, strike=100.0, companion=None, rate=0.0, sigma=0.2):
    """Constant market: same spot, price and remaining maturity every date."""
    price = bs_price(PricingInputs(100.0, strike, rate, 0.5, sigma, "call"))
    comp_prices = None
    if companion is not None:
        comp = bs_price(PricingInputs(100.0, companion, rate, 0.5, sigma, "call"))
        comp_prices = (comp,) * n
    return HedgePath(strike=strike, kind="call",
                     times=tuple(i / 365 for i in range(n)),
                     taus=(0.5,) * n, spots=(100.0,) * n, rates=(rate,) * n,
                     option_prices=(price,) * n,
                     companion_strike=companion, companion_prices=comp_prices,
                     label="flat")


def market_paths(**overrides):
    base = dict(s0=100.0, rate=0.03, vol=0.2, n_days=30,
                strikes=(100.0, 105.0), expiry_days=(45,), seed=5)
    base.update(overrides)
    return build_paths(generate_quotes(MarketSpec(**base)))


def test_portfolio_starts_at_exactly_zero():
    gbm = market_paths()[0]
    for simulate in (simulate_delta, simulate_delta_gamma, simulate_delta_vega):
        assert simulate(gbm, BS).initial_value == 0.0


def test_static_market_hedges_cost_nothing():
    path = flat_path(companion=105.0)
    assert simulate_delta(path, BS).terminal_error == 0.0
    assert simulate_delta_gamma(path, BS).terminal_error == 0.0
    assert simulate_delta_vega(path, BS).terminal_error == 0.0


def test_delta_positions_neutralise_delta():
    path = market_paths()[0]
    trace = simulate_delta(path, BS)
    for i in range(path.n_dates - 1):
        f = hedge_factors(BS, path.spots[i], path.strike, path.rates[i],
                          path.taus[i], path.kind, path.option_prices[i])
        assert f.delta + trace.stock_units[i] == 0.0


@pytest.mark.parametrize("simulate,which", [(simulate_delta_gamma, "gamma"),
                                            (simulate_delta_vega, "vega")])
def test_two_greek_neutrality_residuals(simulate, which):
    path = market_paths()[0]
    trace = simulate(path, BS)
    for i in range(path.n_dates - 1):
        fv = hedge_factors(BS, path.spots[i], path.strike, path.rates[i],
                           path.taus[i], path.kind, path.option_prices[i])
        fc = hedge_factors(BS, path.spots[i], path.companion_strike,
                           path.rates[i], path.taus[i], path.kind,
                           path.companion_prices[i])
        x = trace.stock_units[i]
        y = trace.companion_units[i]
        assert abs(fv.delta + x + y * fc.delta) <= 1e-12
        second = getattr(fv, which) + y * getattr(fc, which)
        assert abs(second) <= 1e-12


def test_gamma_and_vega_ratios_agree_on_flat_vol():
    # same expiry and equal implied vols make the two companion ratios equal
    path = market_paths()[0]
    yg = simulate_delta_gamma(path, BS).companion_units
    yv = simulate_delta_vega(path, BS).companion_units
    for a, b in zip(yg, yv):
        assert a == pytest.approx(b, rel=1e-10)


def test_account_accrues_between_dates():
    path = flat_path(n=3, rate=0.05)
    trace = simulate_delta(path, BS)
    grown = trace.account[0] * math.exp(0.05 / 365)
    f = hedge_factors(BS, 100.0, 100.0, 0.05, 0.5, "call", path.option_prices[1])
    rebalance_cost = 100.0 * (-f.delta - trace.stock_units[0])
    assert trace.account[1] == pytest.approx(grown - rebalance_cost, rel=1e-14)


def test_two_greek_needs_companion():
    with pytest.raises(ValueError, match="companion"):
        simulate_delta_gamma(flat_path(), BS)


def test_degenerate_companion_reports_date_and_label():
    # a far in-the-money companion has gamma and vega numerically at zero
    path = HedgePath(strike=100.0, kind="call",
                     times=(0.0, 1 / 365, 2 / 365), taus=(0.5,) * 3,
                     spots=(100.0,) * 3, rates=(0.0,) * 3,
                     option_prices=(5.0,) * 3, companion_strike=1e-6,
                     companion_prices=(100.0,) * 3, label="probe")
    with pytest.raises(DegenerateHedgeError, match=r"gamma.*t=0\.000000.*probe"):
        simulate_delta_gamma(path, FLAT_TREE)


def test_gp_source_floors_volatility():
    negative = VolSource.from_tree(parse_tree("(- 0.0 sok)"))
    sigma = negative.sigma_for(100.0, 100.0, 0.0, 0.5, "call", 5.0)
    assert sigma == GP_VOL_FLOOR


def test_gp_source_feeds_price_strike_ratio():
    tree = VolSource.from_tree(parse_tree("cok"))
    assert tree.sigma_for(100.0, 80.0, 0.0, 0.5, "call", 24.0) == 0.3


def test_bs_source_inverts_market_price():
    price = bs_price(PricingInputs(100.0, 95.0, 0.02, 0.4, 0.31, "call"))
    sigma = BS.sigma_for(100.0, 95.0, 0.02, 0.4, "call", price)
    assert sigma == pytest.approx(0.31, abs=1e-9)


def test_vol_source_validation():
    with pytest.raises(ValueError):
        VolSource("gp_model")
    with pytest.raises(ValueError):
        VolSource("bs_implied", parse_tree("cok"))


def test_hedge_path_validation():
    ok = dict(strike=100.0, kind="call", times=(0.0, 1 / 365),
              taus=(0.5, 0.49), spots=(100.0, 101.0), rates=(0.0, 0.0),
              option_prices=(5.0, 5.5))
    HedgePath(**ok)
    with pytest.raises(ValueError):
        HedgePath(**{**ok, "times": (0.1, 0.2)})
    with pytest.raises(ValueError):
        HedgePath(**{**ok, "times": (0.0, 0.0)})
    with pytest.raises(ValueError):
        HedgePath(**{**ok, "taus": (0.5, 0.0)})
    with pytest.raises(ValueError):
        HedgePath(**{**ok, "spots": (100.0,)})
    with pytest.raises(ValueError):
        HedgePath(**{**ok, "companion_strike": 105.0})


def test_path_counters():
    path = flat_path(n=5)
    assert path.n_dates == 5
    assert path.n_rebalances == 4
    assert path.maturity == 0.5


def test_resample_stride_and_final_date():
    path = market_paths(n_days=10)[0]
    weekly = resample(path, 7)
    assert weekly.times[0] == 0.0
    assert [round(t * 365) for t in weekly.times] == [0, 7, 9]
    assert weekly.n_rebalances == 2
    assert weekly.option_prices[-1] == path.option_prices[-1]
    assert resample(path, 1) is path
    with pytest.raises(ValueError):
        resample(path, 0)


def test_resample_weekday_grid_hits_every_fifth_day():
    days = [0, 1, 2, 3, 4, 7, 8, 9, 10, 11, 14]
    path = HedgePath(strike=100.0, kind="call",
                     times=tuple(d / 365 for d in days),
                     taus=tuple(0.5 - d / 365 for d in days),
                     spots=(100.0,) * 11, rates=(0.0,) * 11,
                     option_prices=(5.0,) * 11)
    weekly = resample(path, 7)
    assert [round(t * 365) for t in weekly.times] == [0, 7, 14]


def test_normalised_error_formula():
    res = OptionHedgeResult("x", 1.0, 10, 2.0, 0.0, 0.5)
    assert res.normalised_error() == 0.05
    res = OptionHedgeResult("x", 1.0, 1, 1.0, 0.05, 1.0)
    assert res.normalised_error() == pytest.approx(math.exp(-0.05), rel=1e-15)
    with pytest.raises(ValueError):
        OptionHedgeResult("x", 1.0, 0, 1.0, 0.0, 0.5).normalised_error()
    with pytest.raises(ValueError):
        OptionHedgeResult("x", 1.0, 3, 0.0, 0.0, 0.5).normalised_error()


def test_tracking_error_is_mean():
    results = [OptionHedgeResult("a", 1.0, 10, 2.0, 0.0, 0.5),
               OptionHedgeResult("b", 3.0, 10, 2.0, 0.0, 0.5)]
    assert tracking_error(results) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        tracking_error([])


def test_build_paths_companion_is_nearest_strike():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=5,
        strikes=(90.0, 100.0, 107.0), expiry_days=(60,), seed=2))
    paths = {p.strike: p for p in build_paths(quotes)}
    assert paths[100.0].companion_strike == 107.0  # |7| beats |10|
    assert paths[90.0].companion_strike == 100.0
    assert paths[107.0].companion_strike == 100.0


def test_build_paths_companion_tie_prefers_lower_strike():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=4,
        strikes=(95.0, 100.0, 105.0), expiry_days=(60,), seed=3))
    paths = {p.strike: p for p in build_paths(quotes)}
    assert paths[100.0].companion_strike == 95.0


def test_build_paths_requires_shared_expiry_and_kind():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=4,
        strikes=(100.0,), expiry_days=(60, 90), seed=4, kinds=("call", "put")))
    for path in build_paths(quotes):
        assert path.companion_strike is None


def test_build_paths_first_quote_per_date_wins():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=3, strikes=(100.0,),
        expiry_days=(60,), seed=6))
    doubled = quotes + [q for q in quotes]  # duplicates appended after
    (a,) = build_paths(quotes)
    (b,) = build_paths(doubled)
    assert a == b


def test_build_paths_contract_selection():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=4,
        strikes=(95.0, 100.0), expiry_days=(60,), seed=7))
    expiry = dt.date(2003, 1, 2) + dt.timedelta(days=60)
    picked = build_paths(quotes, contracts=[(100.0, expiry, "call")])
    assert [p.strike for p in picked] == [100.0]
    assert picked[0].companion_strike == 95.0  # companions from the full set
    with pytest.raises(ValueError, match="no quotes"):
        build_paths(quotes, contracts=[(111.0, expiry, "call")])


def test_build_paths_min_dates_skips_short_histories():
    quotes = generate_quotes(MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=3, strikes=(100.0,),
        expiry_days=(60,), seed=8))
    assert build_paths(quotes, min_dates=4) == []


def test_report_ties_are_not_wins():
    paths = market_paths()
    report = build_report(paths, {"BS": BS, "GP": BS}, strategies=("delta",),
                          frequencies=(1,))
    assert report.win_rate == 0.0
    assert report.win_cells == 0
    assert report.total_cells == len(report.cells) // 2


def test_report_win_rate_matches_cells():
    paths = market_paths()
    mispriced = VolSource.from_tree(parse_tree("0.3"))
    report = build_report(paths, {"BS": BS, "GP": mispriced},
                          strategies=("delta", "delta_gamma"), frequencies=(1, 7))
    by_key = {(c.sk_class, c.maturity_class, c.strategy, c.frequency_days,
               c.model): c.avg_error for c in report.cells}
    wins = comparable = 0
    for key in by_key:
        if key[-1] != "GP":
            continue
        bs_key = key[:-1] + ("BS",)
        if bs_key in by_key:
            comparable += 1
            wins += by_key[key] < by_key[bs_key]
    assert report.total_cells == comparable
    assert report.win_cells == wins
    assert report.win_rate == pytest.approx(wins / comparable, abs=1e-15)


def test_report_without_both_models_has_no_win_rate():
    report = build_report(market_paths(), {"BS": BS}, strategies=("delta",),
                          frequencies=(1,))
    assert report.win_rate is None
    assert report.cells


def test_report_drops_option_when_any_source_fails():
    # price on the middle date sits below the no-arbitrage floor, so the
    # implied-vol source fails there while the formula source would not
    bad = HedgePath(strike=100.0, kind="call", times=(0.0, 1 / 365, 2 / 365),
                    taus=(0.3, 0.3 - 1 / 365, 0.3 - 2 / 365),
                    spots=(120.0, 120.0, 120.0), rates=(0.02,) * 3,
                    option_prices=(22.0, 5.0, 22.0), label="bad")
    both = build_report([bad], {"BS": BS, "GP": FLAT_TREE},
                        strategies=("delta",), frequencies=(1,))
    assert both.cells == ()
    assert any("bad" in note for note in both.notes)
    alone = build_report([bad], {"GP": FLAT_TREE}, strategies=("delta",),
                         frequencies=(1,))
    assert len(alone.cells) == 1


def test_report_cell_population_counts():
    paths = market_paths()
    report = build_report(paths, {"BS": BS}, strategies=("delta",),
                          frequencies=(1,))
    for cell in report.cells:
        assert cell.n_options >= 1
        assert cell.frequency_days == 1
        assert cell.model == "BS"
    assert sum(c.n_options for c in report.cells) == len(paths)


def test_report_validation():
    with pytest.raises(ValueError, match="unknown strategies"):
        build_report([], {"BS": BS}, strategies=("theta",))
    with pytest.raises(ValueError, match="source"):
        build_report([], {})


def test_write_report_csv(tmp_path):
    report = build_report(market_paths(), {"BS": BS, "GP": FLAT_TREE},
                          strategies=("delta",), frequencies=(1, 7))
    out = tmp_path / "report.csv"
    write_report_csv(report, out)
    with open(out, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sk_class", "maturity", "strategy", "model",
                       "frequency_days", "avg_error", "n_options"]
    assert rows[-1][0] == "WIN_RATE"
    assert float(rows[-1][5]) == report.win_rate
    for row in rows[1:-1]:
        assert float(row[5]) >= 0.0

    long_out = tmp_path / "long.csv"
    write_report_csv(report, long_out, long_format=True)
    with open(long_out, newline="", encoding="utf-8") as fh:
        long_rows = list(csv.reader(fh))
    assert long_rows[0] == ["option", "sk_class", "maturity", "strategy",
                            "model", "frequency_days", "error"]
    assert len(long_rows) == 1 + len(report.per_option) + 1


def test_run_helpers_return_terminal_error():
    path = market_paths()[0]
    assert run_delta(path, BS) == simulate_delta(path, BS).terminal_error
