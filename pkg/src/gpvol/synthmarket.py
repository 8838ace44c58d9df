"""Seedable synthetic market: GBM index paths and option quote surfaces.

Quotes are priced with the pricing engine at a configurable true-volatility
function of (S/K, tau), so implied vols recovered downstream have a known
ground truth. All randomness flows from one integer seed.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .blackscholes import PricingInputs, bs_price
from .quotes import DAYS_PER_YEAR, OptionQuote

VolFn = Callable[[float, float], float]

_PATH_VOL_TENOR = 30.0 / DAYS_PER_YEAR


@dataclass(frozen=True)
class MarketSpec:
    """Parameters of one synthetic market.

    ``vol`` is either a constant or a function of (moneyness, tau) giving the
    true volatility used to price quotes. ``path_vol`` is the diffusion
    coefficient of the index itself; by default the true vol at-the-money at
    a 30-day tenor. ``spread`` is a half-spread: bid = mid - spread,
    ask = mid + spread, floored at zero.
    """

    s0: float
    rate: float
    vol: float | VolFn
    n_days: int
    strikes: tuple[float, ...]
    expiry_days: tuple[int, ...]
    spread: float = 0.0
    seed: int = 1
    start: dt.date = dt.date(2003, 1, 2)
    kinds: tuple[str, ...] = ("call",)
    path_vol: float | None = None

    def __post_init__(self) -> None:
        if self.s0 <= 0.0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if self.n_days < 1:
            raise ValueError(f"n_days must be >= 1, got {self.n_days}")
        if not self.strikes or any(k <= 0.0 for k in self.strikes):
            raise ValueError("strikes must be non-empty and positive")
        if not self.expiry_days or any(e < 1 for e in self.expiry_days):
            raise ValueError("expiry_days must be non-empty and >= 1")
        if self.spread < 0.0:
            raise ValueError(f"spread must be >= 0, got {self.spread}")
        if not callable(self.vol) and self.vol <= 0.0:
            raise ValueError(f"constant vol must be positive, got {self.vol}")
        bad = [k for k in self.kinds if k not in ("call", "put")]
        if bad:
            raise ValueError(f"kinds must be call/put, got {bad}")
        if self.path_vol is not None and self.path_vol < 0.0:
            raise ValueError(f"path_vol must be >= 0, got {self.path_vol}")

    def vol_at(self, moneyness: float, tau: float) -> float:
        sigma = self.vol(moneyness, tau) if callable(self.vol) else self.vol
        if sigma <= 0.0:
            raise ValueError(f"true vol must stay positive, got {sigma} "
                             f"at (m={moneyness}, tau={tau})")
        return sigma

    def diffusion_vol(self) -> float:
        if self.path_vol is not None:
            return self.path_vol
        return self.vol_at(1.0, _PATH_VOL_TENOR)


def gbm_path(spec: MarketSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Daily index series of length n_days, starting at S0.

    Normal steps come from an inverse-CDF transform of the seeded uniform
    stream, so paths are reproducible across platforms.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    sigma = spec.diffusion_vol()
    n_steps = spec.n_days - 1
    dt_years = 1.0 / DAYS_PER_YEAR
    drift = (spec.rate - 0.5 * sigma * sigma) * dt_years
    u = rng.uniform(0.0, 1.0, size=n_steps)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    log_steps = drift + sigma * math.sqrt(dt_years) * z
    growth = np.exp(np.concatenate(([0.0], np.cumsum(log_steps))))
    return spec.s0 * growth


def quote_surface(path: Sequence[float], spec: MarketSpec) -> list[OptionQuote]:
    """Price the full (date, strike, expiry, kind) grid along an index path.

    Expiries falling on or before a quote date are skipped for that date.
    """
    quotes = []
    for day, spot in enumerate(path):
        spot = float(spot)
        quote_date = spec.start + dt.timedelta(days=day)
        for offset in spec.expiry_days:
            remaining = offset - day
            if remaining < 1:
                continue
            expiry_date = spec.start + dt.timedelta(days=offset)
            tau = remaining / DAYS_PER_YEAR
            for strike in spec.strikes:
                sigma = spec.vol_at(spot / strike, tau)
                for kind in spec.kinds:
                    mid = bs_price(PricingInputs(spot, strike, spec.rate, tau,
                                                 sigma, kind))
                    bid = max(mid - spec.spread, 0.0)
                    ask = max(mid + spec.spread, 0.0)
                    quotes.append(OptionQuote(
                        quote_date=quote_date, expiry_date=expiry_date,
                        strike=strike, bid=bid, ask=ask, underlying=spot,
                        rate=spec.rate, kind=kind))
    return quotes


def generate_quotes(spec: MarketSpec) -> list[OptionQuote]:
    """Convenience wrapper: simulate one path and quote the whole surface."""
    return quote_surface(gbm_path(spec), spec)


def smile_vol(base: float, smile: float = 0.0, term: float = 0.0) -> VolFn:
    """Quadratic-smile volatility family sigma = base + smile*(m-1)^2 + term*tau."""

    def fn(moneyness: float, tau: float) -> float:
        return base + smile * (moneyness - 1.0) ** 2 + term * tau

    return fn
