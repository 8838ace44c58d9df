"""Shared fixtures: deterministic synthetic quote sets sized for partitioning
and training tests."""

import pytest

from gpvol.quotes import apply_filters, to_records
from gpvol.synthmarket import MarketSpec, generate_quotes, smile_vol


@pytest.fixture(scope="session")
def flat_market_spec():
    """Constant-vol market on a frozen index: 667 quote days, two expiries,
    five strikes -> 6670 quotes, all passing the default filters."""
    return MarketSpec(
        s0=100.0, rate=0.0, vol=0.2, n_days=667,
        strikes=(100.0 / 0.95, 100.0 / 0.98, 100.0, 100.0 / 1.03, 100.0 / 1.06),
        expiry_days=(700, 1400), spread=0.0, seed=20030102, path_vol=0.0)


@pytest.fixture(scope="session")
def flat_quotes(flat_market_spec):
    return generate_quotes(flat_market_spec)


@pytest.fixture(scope="session")
def flat_filtered(flat_quotes):
    return apply_filters(flat_quotes)


@pytest.fixture(scope="session")
def trend_records():
    """Records whose implied-vol target is 0.15 + 0.05*tau on a frozen index
    with a single strike, so moneyness carries no information."""
    spec = MarketSpec(
        s0=100.0, rate=0.0, vol=smile_vol(0.15, 0.0, 0.05), n_days=40,
        strikes=(100.0,), expiry_days=(50, 140, 230, 320, 410, 500, 590, 680),
        spread=0.0, seed=3, path_vol=0.0)
    records, dropped = to_records(apply_filters(generate_quotes(spec)))
    assert dropped == 0
    return records
