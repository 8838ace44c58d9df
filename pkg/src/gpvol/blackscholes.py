"""Black-Scholes pricing, implied volatility, and the Greeks used for hedging.

All rates and volatilities are annualised; maturities are year fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

OptionKind = Literal["call", "put"]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Implied-vol search: bracket, iteration budget and stopping rules.
SIGMA_LO = 1e-6
SIGMA_HI = 5.0
_MAX_ITER = 100
_PRICE_TOL = 1e-10  # scaled by strike
_SIGMA_TOL = 1e-12


class NoRootError(ValueError):
    """The price admits no implied volatility (outside no-arbitrage bounds or bracket)."""


class ConvergenceError(RuntimeError):
    """The implied-vol search exhausted its iteration budget."""


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc; accurate to about 1e-16 absolute."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    """Standard normal density."""
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class PricingInputs:
    """Validated argument bundle for pricing and Greeks."""

    spot: float
    strike: float
    rate: float
    tau: float
    sigma: float
    kind: OptionKind = "call"

    def __post_init__(self) -> None:
        if not (self.spot > 0.0 and math.isfinite(self.spot)):
            raise ValueError(f"spot must be positive and finite, got {self.spot}")
        if not (self.strike > 0.0 and math.isfinite(self.strike)):
            raise ValueError(f"strike must be positive and finite, got {self.strike}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if self.rate < 0.0 or not math.isfinite(self.rate):
            raise ValueError(f"rate must be non-negative and finite, got {self.rate}")
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")


@dataclass(frozen=True)
class Greeks:
    delta: float
    gamma: float
    vega: float


def _d1_d2(spot: float, strike: float, rate: float, tau: float, sigma: float) -> tuple[float, float]:
    vol_sqrt_t = sigma * math.sqrt(tau)
    d1 = (math.log(spot / strike) + (rate + 0.5 * sigma * sigma) * tau) / vol_sqrt_t
    return d1, d1 - vol_sqrt_t


def _call_price(spot: float, strike: float, rate: float, tau: float, sigma: float) -> float:
    d1, d2 = _d1_d2(spot, strike, rate, tau, sigma)
    return spot * norm_cdf(d1) - strike * math.exp(-rate * tau) * norm_cdf(d2)


def _put_price(spot: float, strike: float, rate: float, tau: float, sigma: float) -> float:
    # direct form, not parity: parity cancellation would swamp small
    # out-of-the-money prices with absolute rounding noise
    d1, d2 = _d1_d2(spot, strike, rate, tau, sigma)
    return strike * math.exp(-rate * tau) * norm_cdf(-d2) - spot * norm_cdf(-d1)


def bs_price(inputs: PricingInputs) -> float:
    """European option price."""
    if inputs.kind == "call":
        return _call_price(inputs.spot, inputs.strike, inputs.rate, inputs.tau,
                           inputs.sigma)
    return _put_price(inputs.spot, inputs.strike, inputs.rate, inputs.tau,
                      inputs.sigma)


def greeks(inputs: PricingInputs) -> Greeks:
    """Delta, gamma and vega. Vega is per unit of volatility (not per point)."""
    d1, _ = _d1_d2(inputs.spot, inputs.strike, inputs.rate, inputs.tau, inputs.sigma)
    pdf = norm_pdf(d1)
    sqrt_t = math.sqrt(inputs.tau)
    delta = norm_cdf(d1) if inputs.kind == "call" else norm_cdf(d1) - 1.0
    gamma = pdf / (inputs.spot * inputs.sigma * sqrt_t)
    vega = inputs.spot * pdf * sqrt_t
    return Greeks(delta=delta, gamma=gamma, vega=vega)


def no_arbitrage_bounds(spot: float, strike: float, rate: float, tau: float,
                        kind: OptionKind) -> tuple[float, float]:
    """Open interval of prices admitting an implied volatility."""
    disc_strike = strike * math.exp(-rate * tau)
    if kind == "call":
        return max(spot - disc_strike, 0.0), spot
    return max(disc_strike - spot, 0.0), disc_strike


def implied_vol(price: float, spot: float, strike: float, rate: float, tau: float,
                kind: OptionKind = "call") -> float:
    """Invert the pricing formula for sigma.

    Bisection on [1e-6, 5] keeps a guaranteed bracket; Newton steps using vega
    accelerate inside it. Converges until the estimated sigma error is below
    1e-12 (or the bracket collapses) and the price residual is below 1e-10
    times the strike.

    Raises NoRootError if the price is not strictly inside the no-arbitrage
    bounds or not attainable for sigma in the bracket, ConvergenceError if the
    iteration budget runs out.
    """
    if not (spot > 0.0 and strike > 0.0 and tau > 0.0):
        raise ValueError(
            f"need positive spot, strike and tau, got S={spot} K={strike} tau={tau}")
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    lo_bound, hi_bound = no_arbitrage_bounds(spot, strike, rate, tau, kind)
    if not (lo_bound < price < hi_bound):
        raise NoRootError(
            f"price {price} outside no-arbitrage bounds ({lo_bound}, {hi_bound}) "
            f"for {kind} S={spot} K={strike} tau={tau}"
        )

    model = _call_price if kind == "call" else _put_price

    lo, hi = SIGMA_LO, SIGMA_HI
    if model(spot, strike, rate, tau, lo) - price > 0.0 \
            or model(spot, strike, rate, tau, hi) - price < 0.0:
        raise NoRootError(
            f"price {price} not attainable for sigma in [{SIGMA_LO}, {SIGMA_HI}]"
        )

    price_tol = _PRICE_TOL * strike
    sqrt_tau = math.sqrt(tau)
    # Brenner-Subrahmanyam at-the-money seed, clipped into the bracket.
    sigma = min(max(math.sqrt(2.0 * math.pi / tau) * price / spot, lo * 1.01), hi * 0.99)
    for _ in range(_MAX_ITER):
        value = model(spot, strike, rate, tau, sigma)
        res = value - price
        if res > 0.0:
            hi = sigma
        else:
            lo = sigma
        d1, _ = _d1_d2(spot, strike, rate, tau, sigma)
        vega = spot * norm_pdf(d1) * sqrt_tau
        sigma_err = abs(res) / vega if vega > 0.0 else math.inf
        if abs(res) <= price_tol and (sigma_err <= _SIGMA_TOL or hi - lo <= _SIGMA_TOL):
            return sigma
        # Newton on log price: far out of the money the price is nearly
        # log-linear in sigma, where plain Newton crawls.
        if vega > 0.0 and value > 0.0:
            step_target = sigma + math.log(price / value) * value / vega
        else:
            step_target = math.nan
        if not (lo < step_target < hi):
            step_target = 0.5 * (lo + hi)
        if step_target == sigma:
            # Bracket at float resolution; nothing further to gain.
            if abs(res) <= price_tol:
                return sigma
            step_target = 0.5 * (lo + hi)
            if step_target == sigma:
                break
        sigma = step_target
    raise ConvergenceError(
        f"implied vol search did not converge for price={price} S={spot} "
        f"K={strike} r={rate} tau={tau} kind={kind}"
    )
