"""Self-financing hedge simulations and per-class tracking-error reports.

A hedge path follows one option contract over its rebalancing dates. The
delta strategy holds the option, a stock position and a money account; the
delta-gamma and delta-vega strategies add a same-expiry companion option so
that the second Greek can be neutralised as well. Portfolios start at exactly
zero value and the terminal absolute value is the hedging error.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .blackscholes import Greeks, NoRootError, PricingInputs, greeks, implied_vol
from .gptree import ExprTree, eval_tree
from .quotes import (DAYS_PER_YEAR, MoneynessClass, MaturityClass, OptionQuote,
                     classify_values, mid_price)

GP_VOL_FLOOR = 1e-4
_GREEK_EPS = 1e-12

STRATEGIES = ("delta", "delta_gamma", "delta_vega")

SK_CLASS_LABELS = {"OTM": "<0.98", "ATM": "0.98-1.03", "ITM": ">=1.03"}
MATURITY_LABELS = {"ST": "<60", "MT": "60-180", "LT": ">180"}


class DegenerateHedgeError(ValueError):
    """The companion option cannot neutralise the targeted Greek."""


@dataclass(frozen=True)
class VolSource:
    """Where hedge volatilities come from: inverted market prices or a model
    formula fed with (price/K, S/K, tau)."""

    kind: Literal["bs_implied", "gp_model"]
    tree: ExprTree | None = None

    def __post_init__(self) -> None:
        if self.kind == "gp_model" and self.tree is None:
            raise ValueError("gp_model source needs a tree")
        if self.kind == "bs_implied" and self.tree is not None:
            raise ValueError("bs_implied source takes no tree")

    @staticmethod
    def black_scholes() -> "VolSource":
        return VolSource("bs_implied")

    @staticmethod
    def from_tree(tree: ExprTree) -> "VolSource":
        return VolSource("gp_model", tree)

    def sigma_for(self, spot: float, strike: float, rate: float, tau: float,
                  kind: str, market_price: float) -> float:
        if self.kind == "bs_implied":
            return implied_vol(market_price, spot, strike, rate, tau, kind)
        raw = eval_tree(self.tree, (market_price / strike, spot / strike, tau))
        return max(raw, GP_VOL_FLOOR)


@dataclass(frozen=True)
class HedgeFactors:
    delta: float
    gamma: float
    vega: float
    sigma: float


def hedge_factors(source: VolSource, spot: float, strike: float, rate: float,
                  tau: float, kind: str, market_price: float) -> HedgeFactors:
    """Greeks of one option under the source's volatility."""
    sigma = source.sigma_for(spot, strike, rate, tau, kind, market_price)
    g: Greeks = greeks(PricingInputs(spot, strike, rate, tau, sigma, kind))
    return HedgeFactors(g.delta, g.gamma, g.vega, sigma)


@dataclass(frozen=True)
class HedgePath:
    """One contract's market history over its rebalancing dates.

    ``times`` are year offsets from the first date; ``taus`` the remaining
    maturities. Companion fields are None when no second option is available.
    """

    strike: float
    kind: str
    times: tuple[float, ...]
    taus: tuple[float, ...]
    spots: tuple[float, ...]
    rates: tuple[float, ...]
    option_prices: tuple[float, ...]
    companion_strike: float | None = None
    companion_prices: tuple[float, ...] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        n = len(self.times)
        series = [self.taus, self.spots, self.rates, self.option_prices]
        if self.companion_prices is not None:
            series.append(self.companion_prices)
        if any(len(s) != n for s in series):
            raise ValueError("all per-date series must share one length")
        if n == 0:
            raise ValueError("a hedge path needs at least one date")
        if self.times[0] != 0.0:
            raise ValueError("times must start at 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if any(t <= 0.0 for t in self.taus):
            raise ValueError("remaining maturity must stay positive")
        if (self.companion_prices is None) != (self.companion_strike is None):
            raise ValueError("companion strike and prices go together")

    @property
    def n_dates(self) -> int:
        return len(self.times)

    @property
    def n_rebalances(self) -> int:
        """Trades happen on every date except the final close-out."""
        return len(self.times) - 1

    @property
    def maturity(self) -> float:
        """Option maturity at hedge start, in years."""
        return self.taus[0]


def resample(path: HedgePath, every_days: int) -> HedgePath:
    """Keep dates at least ``every_days`` calendar days apart, plus the final
    date. On weekday-only data a 7-day stride lands on every 5th trading day."""
    if every_days < 1:
        raise ValueError(f"every_days must be >= 1, got {every_days}")
    if every_days == 1:
        return path
    gap = every_days / DAYS_PER_YEAR - 1e-9
    keep = [0]
    for i in range(1, path.n_dates):
        if path.times[i] - path.times[keep[-1]] >= gap:
            keep.append(i)
    last = path.n_dates - 1
    if keep[-1] != last:
        keep.append(last)

    def take(series):
        return tuple(series[i] for i in keep) if series is not None else None

    times0 = path.times[keep[0]]
    return HedgePath(
        strike=path.strike, kind=path.kind,
        times=tuple(path.times[i] - times0 for i in keep),
        taus=take(path.taus), spots=take(path.spots), rates=take(path.rates),
        option_prices=take(path.option_prices),
        companion_strike=path.companion_strike,
        companion_prices=take(path.companion_prices),
        label=path.label,
    )


@dataclass(frozen=True)
class HedgeTrace:
    """Full holdings history of one simulated hedge."""

    strategy: str
    times: tuple[float, ...]
    stock_units: tuple[float, ...]
    companion_units: tuple[float, ...] | None
    account: tuple[float, ...]
    initial_value: float
    terminal_error: float


def simulate_delta(path: HedgePath, source: VolSource) -> HedgeTrace:
    """Delta hedge: long option, short (model) delta in stock, money account.

    The stock position is rebalanced on every date but the last; the account
    accrues at the path rate between dates.
    """
    f0 = hedge_factors(source, path.spots[0], path.strike, path.rates[0],
                       path.taus[0], path.kind, path.option_prices[0])
    pos = -f0.delta
    beta = -(path.option_prices[0] + pos * path.spots[0])
    p0 = path.option_prices[0] + pos * path.spots[0] + beta

    positions = [pos]
    accounts = [beta]
    n = path.n_dates
    for i in range(1, n):
        dt = path.times[i] - path.times[i - 1]
        beta *= math.exp(path.rates[i - 1] * dt)
        if i < n - 1:
            fi = hedge_factors(source, path.spots[i], path.strike, path.rates[i],
                               path.taus[i], path.kind, path.option_prices[i])
            new_pos = -fi.delta
            beta -= path.spots[i] * (new_pos - pos)
            pos = new_pos
        positions.append(pos)
        accounts.append(beta)

    terminal = path.option_prices[-1] + pos * path.spots[-1] + beta
    return HedgeTrace("delta", path.times, tuple(positions), None, tuple(accounts),
                      p0, abs(terminal))


def _simulate_two_greek(path: HedgePath, source: VolSource, strategy: str) -> HedgeTrace:
    """Shared engine for delta-gamma and delta-vega: the companion holding y
    neutralises the second Greek, the stock holding x the residual delta."""
    if path.companion_prices is None:
        raise ValueError(f"{strategy} hedge needs a companion option on the path")
    which = "gamma" if strategy == "delta_gamma" else "vega"

    def holdings(i: int) -> tuple[float, float]:
        fv = hedge_factors(source, path.spots[i], path.strike, path.rates[i],
                           path.taus[i], path.kind, path.option_prices[i])
        fc = hedge_factors(source, path.spots[i], path.companion_strike,
                           path.rates[i], path.taus[i], path.kind,
                           path.companion_prices[i])
        second = getattr(fc, which)
        if abs(second) < _GREEK_EPS:
            raise DegenerateHedgeError(
                f"companion {which} {second} is below {_GREEK_EPS} at "
                f"t={path.times[i]:.6f} on {path.label or 'path'}")
        y = -getattr(fv, which) / second
        x = -fv.delta - y * fc.delta
        return x, y

    x, y = holdings(0)
    account = -(path.option_prices[0] + x * path.spots[0] + y * path.companion_prices[0])
    p0 = path.option_prices[0] + x * path.spots[0] + y * path.companion_prices[0] + account

    xs, ys, accounts = [x], [y], [account]
    n = path.n_dates
    for i in range(1, n):
        dt = path.times[i] - path.times[i - 1]
        account *= math.exp(path.rates[i - 1] * dt)
        if i < n - 1:
            new_x, new_y = holdings(i)
            account -= (new_x - x) * path.spots[i]
            account -= (new_y - y) * path.companion_prices[i]
            x, y = new_x, new_y
        xs.append(x)
        ys.append(y)
        accounts.append(account)

    terminal = (path.option_prices[-1] + x * path.spots[-1]
                + y * path.companion_prices[-1] + account)
    return HedgeTrace(strategy, path.times, tuple(xs), tuple(ys), tuple(accounts),
                      p0, abs(terminal))


def simulate_delta_gamma(path: HedgePath, source: VolSource) -> HedgeTrace:
    return _simulate_two_greek(path, source, "delta_gamma")


def simulate_delta_vega(path: HedgePath, source: VolSource) -> HedgeTrace:
    return _simulate_two_greek(path, source, "delta_vega")


def run_delta(path: HedgePath, source: VolSource) -> float:
    """Terminal absolute hedging error |P(tau)| of the delta strategy."""
    return simulate_delta(path, source).terminal_error


def run_delta_gamma(path: HedgePath, source: VolSource) -> float:
    return simulate_delta_gamma(path, source).terminal_error


def run_delta_vega(path: HedgePath, source: VolSource) -> float:
    return simulate_delta_vega(path, source).terminal_error


_SIMULATORS = {
    "delta": run_delta,
    "delta_gamma": run_delta_gamma,
    "delta_vega": run_delta_vega,
}


@dataclass(frozen=True)
class OptionHedgeResult:
    """One option's hedge outcome, ready for tracking-error aggregation."""

    label: str
    terminal_error: float
    n_rebalances: int
    initial_price: float
    rate: float
    maturity: float

    def normalised_error(self) -> float:
        """Discounted terminal error per rebalancing date per unit premium."""
        if self.n_rebalances < 1:
            raise ValueError("need at least one rebalancing date")
        if self.initial_price <= 0.0:
            raise ValueError("initial option price must be positive")
        discount = math.exp(-self.rate * self.maturity)
        return discount * self.terminal_error / (self.n_rebalances * self.initial_price)


def tracking_error(results: Sequence[OptionHedgeResult]) -> float:
    """Mean normalised hedging error over a class of options."""
    if not results:
        raise ValueError("no hedge results to aggregate")
    return sum(r.normalised_error() for r in results) / len(results)


def build_paths(quotes: Sequence[OptionQuote],
                contracts: Sequence[tuple[float, object, str]] | None = None,
                min_dates: int = 2) -> list[HedgePath]:
    """Group quotes into hedge paths, one per contract, with a same-expiry
    companion at the nearest distinct strike sharing the dates.

    ``contracts`` optionally restricts the hedged contracts to explicit
    (strike, expiry_date, kind) triples; companions are still drawn from the
    full quote set.
    """
    by_contract: dict[tuple[float, object, str], dict[object, OptionQuote]] = {}
    for q in quotes:
        key = (q.strike, q.expiry_date, q.kind)
        by_contract.setdefault(key, {}).setdefault(q.quote_date, q)

    if contracts is not None:
        wanted = [(float(k), e, c) for k, e, c in contracts]
    else:
        wanted = sorted(by_contract, key=lambda k: (k[1], k[0], k[2]))

    paths = []
    for key in wanted:
        if key not in by_contract:
            raise ValueError(f"no quotes for contract {key}")
        strike, expiry, kind = key
        own = by_contract[key]

        companion_key = None
        best_gap = math.inf
        for other in by_contract:
            if other[1] != expiry or other[2] != kind or other[0] == strike:
                continue
            shared = [d for d in own if d in by_contract[other]]
            if len(shared) < min_dates:
                continue
            gap = abs(other[0] - strike)
            if gap < best_gap or (gap == best_gap and other[0] < companion_key[0]):
                best_gap = gap
                companion_key = other

        if companion_key is not None:
            dates = sorted(d for d in own if d in by_contract[companion_key])
        else:
            dates = sorted(own)
        if len(dates) < min_dates:
            continue

        rows = [own[d] for d in dates]
        t0 = dates[0]
        comp = by_contract.get(companion_key, {})
        paths.append(HedgePath(
            strike=strike, kind=kind,
            times=tuple((d - t0).days / DAYS_PER_YEAR for d in dates),
            taus=tuple(r.tau for r in rows),
            spots=tuple(r.underlying for r in rows),
            rates=tuple(r.rate for r in rows),
            option_prices=tuple(mid_price(r) for r in rows),
            companion_strike=companion_key[0] if companion_key else None,
            companion_prices=tuple(mid_price(comp[d]) for d in dates) if companion_key else None,
            label=f"{kind}-K{strike:g}-{expiry}",
        ))
    return paths


@dataclass(frozen=True)
class HedgeCell:
    sk_class: MoneynessClass
    maturity_class: MaturityClass
    strategy: str
    model: str
    frequency_days: int
    avg_error: float
    n_options: int


@dataclass(frozen=True)
class HedgeReport:
    cells: tuple[HedgeCell, ...]
    per_option: tuple[tuple[str, str, str, str, str, int, float], ...]
    win_rate: float | None
    win_cells: int
    total_cells: int
    notes: tuple[str, ...]


def build_report(paths: Sequence[HedgePath],
                 sources: dict[str, VolSource],
                 strategies: Sequence[str] = STRATEGIES,
                 frequencies: Sequence[int] = (1, 7)) -> HedgeReport:
    """Hedge every path under every (strategy, model, frequency) combination
    and aggregate tracking errors per moneyness-maturity class.

    An option enters a cell only if every requested source hedges it without
    error, keeping cross-model comparisons on identical option sets. The win
    rate counts cells where the "GP" model's average error is strictly below
    the "BS" model's; ties are not wins.
    """
    unknown = [s for s in strategies if s not in _SIMULATORS]
    if unknown:
        raise ValueError(f"unknown strategies: {unknown}")
    if not sources:
        raise ValueError("need at least one volatility source")

    grouped: dict[tuple, list[OptionHedgeResult]] = {}
    per_option = []
    notes = []
    for path in paths:
        sk, mat = classify_values(path.spots[0] / path.strike, path.taus[0])
        for freq in frequencies:
            sub = resample(path, freq)
            if sub.n_dates < 2:
                notes.append(f"{path.label}: fewer than two dates at {freq}-day frequency")
                continue
            for strategy in strategies:
                outcomes = {}
                failure = None
                for model_name, source in sources.items():
                    try:
                        outcomes[model_name] = _SIMULATORS[strategy](sub, source)
                    except (DegenerateHedgeError, NoRootError, ValueError) as exc:
                        failure = f"{path.label} [{strategy}, {freq}d, {model_name}]: {exc}"
                        break
                if failure is not None:
                    notes.append(failure)
                    continue
                for model_name, err in outcomes.items():
                    result = OptionHedgeResult(
                        label=path.label, terminal_error=err,
                        n_rebalances=sub.n_rebalances,
                        initial_price=sub.option_prices[0],
                        rate=sub.rates[0], maturity=sub.maturity)
                    if result.initial_price <= 0.0:
                        notes.append(f"{path.label}: zero initial premium, excluded")
                        continue
                    grouped.setdefault((sk, mat, strategy, model_name, freq), []).append(result)
                    per_option.append((path.label, sk, mat, strategy, model_name,
                                       freq, result.normalised_error()))

    cells = []
    for key in sorted(grouped, key=_cell_sort_key):
        sk, mat, strategy, model_name, freq = key
        results = grouped[key]
        cells.append(HedgeCell(sk, mat, strategy, model_name, freq,
                               tracking_error(results), len(results)))

    win_rate = None
    wins = 0
    comparable = 0
    if "GP" in sources and "BS" in sources:
        indexed = {(c.sk_class, c.maturity_class, c.strategy, c.frequency_days, c.model): c
                   for c in cells}
        seen = set()
        for c in cells:
            base = (c.sk_class, c.maturity_class, c.strategy, c.frequency_days)
            if base in seen:
                continue
            seen.add(base)
            gp = indexed.get(base + ("GP",))
            bs = indexed.get(base + ("BS",))
            if gp is None or bs is None:
                continue
            comparable += 1
            if gp.avg_error < bs.avg_error:
                wins += 1
        win_rate = wins / comparable if comparable else None

    return HedgeReport(tuple(cells), tuple(per_option), win_rate, wins,
                       comparable, tuple(notes))


def _cell_sort_key(key: tuple) -> tuple:
    sk, mat, strategy, model, freq = key
    return (("OTM", "ATM", "ITM").index(sk), ("ST", "MT", "LT").index(mat),
            STRATEGIES.index(strategy), model, freq)


REPORT_COLUMNS = ("sk_class", "maturity", "strategy", "model", "frequency_days",
                  "avg_error", "n_options")
LONG_COLUMNS = ("option", "sk_class", "maturity", "strategy", "model",
                "frequency_days", "error")


def write_report_csv(report: HedgeReport, path: str | os.PathLike,
                     long_format: bool = False) -> None:
    """Write the per-class table (or the per-option long table) as CSV, with
    the win-rate summary appended as a final WIN_RATE row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if long_format:
            writer.writerow(LONG_COLUMNS)
            for label, sk, mat, strategy, model, freq, err in report.per_option:
                writer.writerow([label, SK_CLASS_LABELS[sk], MATURITY_LABELS[mat],
                                 strategy, model, freq, repr(err)])
        else:
            writer.writerow(REPORT_COLUMNS)
            for c in report.cells:
                writer.writerow([SK_CLASS_LABELS[c.sk_class],
                                 MATURITY_LABELS[c.maturity_class], c.strategy,
                                 c.model, c.frequency_days, repr(c.avg_error),
                                 c.n_options])
        if report.win_rate is not None:
            row = ["WIN_RATE", "", "", "GP<BS", "", repr(report.win_rate),
                   report.total_cells]
            if long_format:
                row = ["WIN_RATE", "", "", "", "GP<BS", "", repr(report.win_rate)]
            writer.writerow(row)
