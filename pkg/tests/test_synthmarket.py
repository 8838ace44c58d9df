"""Synthetic market: reproducible paths, priced surfaces, known true vol."""

import datetime as dt
import math

import numpy as np
import pytest

from gpvol.blackscholes import PricingInputs, bs_price
from gpvol.quotes import to_records
from gpvol.synthmarket import (MarketSpec, gbm_path, generate_quotes,
                               quote_surface, smile_vol)


def make_spec(**overrides):
    base = dict(s0=100.0, rate=0.02, vol=0.2, n_days=10, strikes=(100.0,),
                expiry_days=(90,), seed=11)
    base.update(overrides)
    return MarketSpec(**base)


def test_path_shape_and_exact_start():
    spec = make_spec(n_days=25)
    path = gbm_path(spec)
    assert path.shape == (25,)
    assert path[0] == 100.0


def test_zero_diffusion_gives_pure_drift():
    spec = make_spec(rate=0.05, path_vol=0.0, n_days=40)
    path = gbm_path(spec)
    t = np.arange(40) / 365.0
    assert np.allclose(path, 100.0 * np.exp(0.05 * t), rtol=1e-12)


def test_paths_are_seed_deterministic():
    spec = make_spec(n_days=50)
    assert np.array_equal(gbm_path(spec), gbm_path(spec))
    other = make_spec(n_days=50, seed=12)
    assert not np.array_equal(gbm_path(spec), gbm_path(other))


def test_quotes_are_seed_deterministic():
    spec = make_spec(n_days=6, strikes=(95.0, 100.0), expiry_days=(30, 60))
    assert generate_quotes(spec) == generate_quotes(spec)


def test_discounted_terminal_is_martingale():
    spec = make_spec(rate=0.05, vol=0.3, n_days=30)
    rng = np.random.default_rng(7)
    n = 10_000
    terminals = np.array([gbm_path(spec, rng)[-1] for _ in range(n)])
    t_end = 29 / 365.0
    discounted = math.exp(-0.05 * t_end) * terminals
    sd = 100.0 * math.exp(0.05 * t_end) * math.sqrt(math.expm1(0.09 * t_end))
    assert abs(discounted.mean() - 100.0) < 3 * sd / math.sqrt(n)


def test_surface_grid_counts_and_expiry_cutoff():
    spec = make_spec(n_days=5, strikes=(95.0, 105.0), expiry_days=(3, 10),
                     kinds=("call", "put"))
    quotes = generate_quotes(spec)
    # expiry day 3 quotable on days 0..2 only; expiry day 10 on all 5 days
    assert len(quotes) == (3 + 5) * 2 * 2
    for q in quotes:
        assert q.expiry_date > q.quote_date
        assert q.days_to_expiry >= 1


def test_quote_dates_and_underlying_follow_the_path():
    spec = make_spec(n_days=3, expiry_days=(30,))
    path = gbm_path(spec)
    quotes = quote_surface(path, spec)
    assert [q.quote_date for q in quotes] == [
        dt.date(2003, 1, 2) + dt.timedelta(days=i) for i in range(3)]
    assert [q.underlying for q in quotes] == [float(s) for s in path]


def test_zero_spread_quotes_recover_flat_vol():
    spec = make_spec(vol=0.2, n_days=8, strikes=(95.0, 100.0, 105.0),
                     expiry_days=(60, 120), kinds=("call", "put"))
    records, dropped = to_records(generate_quotes(spec))
    assert dropped == 0
    assert records
    for rec in records:
        assert rec.target == pytest.approx(0.2, abs=1e-8)


def test_smile_surface_recovered_through_implied_vol():
    fn = smile_vol(0.18, 0.5, 0.04)
    spec = make_spec(vol=fn, n_days=6, strikes=(92.0, 100.0, 108.0),
                     expiry_days=(45, 200), kinds=("call",))
    quotes = generate_quotes(spec)
    records, dropped = to_records(quotes)
    assert dropped == 0
    for rec in records:
        assert rec.target == pytest.approx(fn(rec.moneyness, rec.tau), abs=1e-6)


def test_half_spread_brackets_mid():
    flat = make_spec(spread=0.0, n_days=4, strikes=(90.0, 110.0),
                     kinds=("call", "put"))
    wide = make_spec(spread=0.35, n_days=4, strikes=(90.0, 110.0),
                     kinds=("call", "put"))
    mids = {(q.quote_date, q.strike, q.kind): (q.bid + q.ask) / 2
            for q in generate_quotes(flat)}
    for q in generate_quotes(wide):
        mid = mids[(q.quote_date, q.strike, q.kind)]
        assert q.bid == pytest.approx(max(mid - 0.35, 0.0), abs=1e-12)
        assert q.ask == pytest.approx(mid + 0.35, abs=1e-12)
        assert q.bid <= q.ask


def test_spread_floor_keeps_bid_non_negative():
    spec = make_spec(spread=50.0, n_days=2, strikes=(150.0,), expiry_days=(15,))
    for q in generate_quotes(spec):
        assert q.bid == 0.0
        assert q.ask > 0.0


def test_quotes_priced_at_true_vol():
    spec = make_spec(vol=0.25, n_days=1, strikes=(97.0,), expiry_days=(73,))
    (q,) = generate_quotes(spec)
    want = bs_price(PricingInputs(100.0, 97.0, 0.02, 73 / 365, 0.25, "call"))
    assert (q.bid + q.ask) / 2 == pytest.approx(want, abs=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        make_spec(s0=-1.0)
    with pytest.raises(ValueError):
        make_spec(n_days=0)
    with pytest.raises(ValueError):
        make_spec(strikes=())
    with pytest.raises(ValueError):
        make_spec(expiry_days=(0,))
    with pytest.raises(ValueError):
        make_spec(spread=-0.1)
    with pytest.raises(ValueError):
        make_spec(vol=0.0)
    with pytest.raises(ValueError):
        make_spec(kinds=("call", "straddle"))
    with pytest.raises(ValueError):
        make_spec(path_vol=-0.2)


def test_vol_fn_must_stay_positive():
    spec = make_spec(vol=smile_vol(0.01, 0.0, -0.5))
    with pytest.raises(ValueError, match="positive"):
        spec.vol_at(1.0, 1.0)


def test_diffusion_vol_default_and_override():
    spec = make_spec(vol=smile_vol(0.2, 0.0, 0.1))
    assert spec.diffusion_vol() == pytest.approx(0.2 + 0.1 * 30 / 365, abs=1e-15)
    assert make_spec(path_vol=0.07).diffusion_vol() == 0.07


def test_smile_vol_components():
    fn = smile_vol(0.18)
    assert fn(0.9, 2.0) == 0.18
    fn = smile_vol(0.18, 0.5, 0.04)
    assert fn(1.1, 0.5) == pytest.approx(0.18 + 0.5 * 0.01 + 0.02, abs=1e-15)
