"""Option-quote ingestion, exclusion filters, classification and sample partitioning.

Quotes travel as CSV with the header
``quote_date,expiry_date,strike,bid,ask,underlying,rate,kind`` (ISO-8601
dates). Training data is derived from quotes as (price/K, S/K, tau) records
whose target is the Black-Scholes implied volatility of the mid price.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Literal, Sequence

from .blackscholes import NoRootError, implied_vol

DAYS_PER_YEAR = 365.0

# Moneyness class bounds (on S/K) and maturity class bounds (in days).
OTM_BELOW = 0.98
ITM_FROM = 1.03
SHORT_BELOW_DAYS = 60
LONG_ABOVE_DAYS = 180

# Default exclusion-filter thresholds.
DEFAULT_MIN_DAYS = 10
DEFAULT_MIN_QUOTE = 0.125
DEFAULT_MONEYNESS_BAND = (0.90, 1.15)

QUOTE_COLUMNS = ("quote_date", "expiry_date", "strike", "bid", "ask",
                 "underlying", "rate", "kind")

MoneynessClass = Literal["OTM", "ATM", "ITM"]
MaturityClass = Literal["ST", "MT", "LT"]

SCHEMES = ("ts", "mtm", "global")


class QuoteParseError(ValueError):
    """Malformed quote CSV content."""


class QuoteValidationError(ValueError):
    """A structurally valid row with inconsistent fields."""


@dataclass(frozen=True)
class OptionQuote:
    quote_date: date
    expiry_date: date
    strike: float
    bid: float
    ask: float
    underlying: float
    rate: float
    kind: Literal["call", "put"]

    def __post_init__(self) -> None:
        if self.expiry_date <= self.quote_date:
            raise QuoteValidationError(
                f"expiry {self.expiry_date} not after quote date {self.quote_date}")
        if self.strike <= 0.0:
            raise QuoteValidationError(f"strike must be positive, got {self.strike}")
        if self.underlying <= 0.0:
            raise QuoteValidationError(f"underlying must be positive, got {self.underlying}")
        if self.bid < 0.0:
            raise QuoteValidationError(f"bid must be non-negative, got {self.bid}")
        if self.bid > self.ask:
            raise QuoteValidationError(f"bid {self.bid} exceeds ask {self.ask}")
        if self.rate < 0.0:
            raise QuoteValidationError(f"rate must be non-negative, got {self.rate}")
        if self.kind not in ("call", "put"):
            raise QuoteValidationError(f"kind must be 'call' or 'put', got {self.kind!r}")

    @property
    def days_to_expiry(self) -> int:
        return (self.expiry_date - self.quote_date).days

    @property
    def tau(self) -> float:
        """Time to maturity in years, ACT/365."""
        return self.days_to_expiry / DAYS_PER_YEAR

    @property
    def moneyness(self) -> float:
        """S/K."""
        return self.underlying / self.strike


def mid_price(quote: OptionQuote) -> float:
    return 0.5 * (quote.bid + quote.ask)


def parse_quotes(text: str) -> list[OptionQuote]:
    """Parse quote CSV text. Row numbers in errors count the header as line 1."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise QuoteParseError("empty input: missing header row")
    missing = [c for c in QUOTE_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise QuoteParseError(f"header is missing columns: {', '.join(missing)}")

    quotes: list[OptionQuote] = []
    for i, row in enumerate(reader, start=2):
        if row.get(None):
            raise QuoteParseError(f"row {i}: more fields than header columns")

        def cell(column: str) -> str:
            value = row.get(column)
            if value is None or value == "":
                raise QuoteParseError(f"row {i}: missing value in column '{column}'")
            return value.strip()

        def number(column: str) -> float:
            raw = cell(column)
            try:
                return float(raw)
            except ValueError:
                raise QuoteParseError(
                    f"row {i}: column '{column}' is not a number: {raw!r}") from None

        def day(column: str) -> date:
            raw = cell(column)
            try:
                return date.fromisoformat(raw)
            except ValueError:
                raise QuoteParseError(
                    f"row {i}: column '{column}' is not an ISO date: {raw!r}") from None

        try:
            quotes.append(OptionQuote(
                quote_date=day("quote_date"),
                expiry_date=day("expiry_date"),
                strike=number("strike"),
                bid=number("bid"),
                ask=number("ask"),
                underlying=number("underlying"),
                rate=number("rate"),
                kind=cell("kind"),  # type: ignore[arg-type]
            ))
        except QuoteValidationError as exc:
            raise QuoteValidationError(f"row {i}: {exc}") from None
    return quotes


def load_quotes(path: str | os.PathLike) -> list[OptionQuote]:
    with open(path, encoding="utf-8") as fh:
        return parse_quotes(fh.read())


def write_quotes_csv(quotes: Iterable[OptionQuote], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUOTE_COLUMNS)
        for q in quotes:
            writer.writerow([
                q.quote_date.isoformat(), q.expiry_date.isoformat(), repr(q.strike),
                repr(q.bid), repr(q.ask), repr(q.underlying), repr(q.rate), q.kind,
            ])


def exclusion_reason(quote: OptionQuote,
                     min_days: int = DEFAULT_MIN_DAYS,
                     min_quote: float = DEFAULT_MIN_QUOTE,
                     moneyness_band: tuple[float, float] = DEFAULT_MONEYNESS_BAND,
                     ) -> str | None:
    """Why a quote is excluded from training data, or None if it is kept."""
    if quote.days_to_expiry < min_days:
        return "short_maturity"
    mid = mid_price(quote)
    if mid < min_quote:
        return "low_quote"
    lo, hi = moneyness_band
    if not (lo <= quote.moneyness <= hi):
        return "deep_moneyness"
    disc_strike = quote.strike * math.exp(-quote.rate * quote.tau)
    bound = (quote.underlying - disc_strike if quote.kind == "call"
             else disc_strike - quote.underlying)
    if mid < bound:
        return "arbitrage"
    return None


def apply_filters(quotes: Sequence[OptionQuote],
                  min_days: int = DEFAULT_MIN_DAYS,
                  min_quote: float = DEFAULT_MIN_QUOTE,
                  moneyness_band: tuple[float, float] = DEFAULT_MONEYNESS_BAND,
                  ) -> list[OptionQuote]:
    """Keep quotes passing the four exclusion filters, preserving order."""
    return [q for q in quotes
            if exclusion_reason(q, min_days, min_quote, moneyness_band) is None]


def filter_counts(quotes: Sequence[OptionQuote],
                  min_days: int = DEFAULT_MIN_DAYS,
                  min_quote: float = DEFAULT_MIN_QUOTE,
                  moneyness_band: tuple[float, float] = DEFAULT_MONEYNESS_BAND,
                  ) -> dict[str, int]:
    """Per-reason drop counts over the input."""
    counts: dict[str, int] = {}
    for q in quotes:
        reason = exclusion_reason(q, min_days, min_quote, moneyness_band)
        if reason is not None:
            counts[reason] = counts.get(reason, 0) + 1
    return counts


def classify_values(moneyness: float, tau_years: float) -> tuple[MoneynessClass, MaturityClass]:
    """Bucket by moneyness (S/K) and maturity (years, ACT/365)."""
    if moneyness < OTM_BELOW:
        mclass: MoneynessClass = "OTM"
    elif moneyness < ITM_FROM:
        mclass = "ATM"
    else:
        mclass = "ITM"
    if tau_years < SHORT_BELOW_DAYS / DAYS_PER_YEAR:
        tclass: MaturityClass = "ST"
    elif tau_years <= LONG_ABOVE_DAYS / DAYS_PER_YEAR:
        tclass = "MT"
    else:
        tclass = "LT"
    return mclass, tclass


def classify(quote: OptionQuote) -> tuple[MoneynessClass, MaturityClass]:
    return classify_values(quote.moneyness, quote.tau)


MTM_CLASS_ORDER: tuple[tuple[MoneynessClass, MaturityClass], ...] = tuple(
    (m, t) for m in ("OTM", "ATM", "ITM") for t in ("ST", "MT", "LT"))


@dataclass(frozen=True)
class Record:
    """One training observation: model inputs plus the implied-vol target."""

    price_over_strike: float
    moneyness: float
    tau: float
    target: float

    def __post_init__(self) -> None:
        for name in ("price_over_strike", "moneyness", "tau", "target"):
            if not math.isfinite(getattr(self, name)):
                raise QuoteValidationError(f"{name} must be finite")
        if self.tau <= 0.0 or self.target <= 0.0:
            raise QuoteValidationError("tau and target must be positive")


def to_records(quotes: Sequence[OptionQuote]) -> tuple[list[Record], int]:
    """Convert quotes to training records.

    Returns (records, dropped) where dropped counts quotes whose mid price
    admits no implied volatility.
    """
    records: list[Record] = []
    dropped = 0
    for q in quotes:
        mid = mid_price(q)
        try:
            vol = implied_vol(mid, q.underlying, q.strike, q.rate, q.tau, q.kind)
        except NoRootError:
            dropped += 1
            continue
        records.append(Record(
            price_over_strike=mid / q.strike,
            moneyness=q.moneyness,
            tau=q.tau,
            target=vol,
        ))
    return records, dropped


@dataclass
class Partition:
    """Named record sets for training plus designated test sets."""

    scheme: str
    samples: dict[str, tuple[Record, ...]]
    test_sets: dict[str, tuple[Record, ...]]
    k: int
    dropped: int = 0

    def training_sets(self) -> list[tuple[str, tuple[Record, ...]]]:
        """Samples usable for training (test-set names excluded)."""
        return [(name, recs) for name, recs in self.samples.items()
                if name not in self.test_sets]

    def enlarged(self) -> tuple[Record, ...]:
        """Value-deduplicated union of every named set, in first-seen order."""
        seen: dict[Record, None] = {}
        for recs in self.samples.values():
            for r in recs:
                seen.setdefault(r)
        for name, recs in self.test_sets.items():
            if name in self.samples:
                continue
            for r in recs:
                seen.setdefault(r)
        return tuple(seen)


def _date_sorted(quotes: Sequence[OptionQuote]) -> list[OptionQuote]:
    return sorted(quotes, key=lambda q: q.quote_date)


def _ts_groups(quotes: Sequence[OptionQuote], k: int) -> list[list[OptionQuote]]:
    ordered = _date_sorted(quotes)
    size = len(ordered) // k
    if size == 0:
        raise ValueError(f"cannot split {len(ordered)} quotes into {k} samples")
    return [ordered[i * size:(i + 1) * size] for i in range(k)]


def _mtm_groups(quotes: Sequence[OptionQuote],
                ) -> dict[tuple[MoneynessClass, MaturityClass],
                          tuple[list[OptionQuote], list[OptionQuote]]]:
    buckets: dict[tuple[MoneynessClass, MaturityClass], list[OptionQuote]] = {
        key: [] for key in MTM_CLASS_ORDER}
    for q in _date_sorted(quotes):
        buckets[classify(q)].append(q)
    out = {}
    for key, rows in buckets.items():
        half = (len(rows) + 1) // 2  # training half rounded up
        out[key] = (rows[:half], rows[half:])
    return out


def build_partition(quotes: Sequence[OptionQuote], scheme: str, k: int = 10) -> Partition:
    """Partition filtered quotes into named training/test record sets.

    ``ts``: k equal, contiguous-by-date samples S1..Sk; Sk is the designated
    test set. ``mtm``: nine moneyness-maturity classes, each split into a
    training half CiL and a test half CiT. ``global``: the union of both
    schemes' training sets, with TEST = Sk plus all CiT halves.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not quotes:
        raise ValueError("cannot partition an empty quote list")

    dropped = 0

    def as_records(group: Sequence[OptionQuote]) -> tuple[Record, ...]:
        nonlocal dropped
        records, n_bad = to_records(group)
        dropped += n_bad
        return tuple(records)

    if scheme == "ts":
        groups = _ts_groups(quotes, k)
        samples = {f"S{i + 1}": as_records(g) for i, g in enumerate(groups)}
        test_name = f"S{k}"
        return Partition(scheme, samples, {test_name: samples[test_name]}, k, dropped)

    if scheme == "mtm":
        groups = _mtm_groups(quotes)
        samples = {}
        tests = {}
        for i, key in enumerate(MTM_CLASS_ORDER, start=1):
            train, test = groups[key]
            samples[f"C{i}L"] = as_records(train)
            tests[f"C{i}T"] = as_records(test)
        return Partition(scheme, samples, tests, 9, dropped)

    # global: both training divisions over the same quotes, one merged test set
    ts_groups = _ts_groups(quotes, k)
    mtm = _mtm_groups(quotes)
    samples = {f"S{i + 1}": as_records(g) for i, g in enumerate(ts_groups[:k - 1])}
    for i, key in enumerate(MTM_CLASS_ORDER, start=1):
        samples[f"C{i}L"] = as_records(mtm[key][0])
    test_quotes: dict[int, OptionQuote] = {}
    for q in ts_groups[k - 1]:
        test_quotes.setdefault(id(q), q)
    for key in MTM_CLASS_ORDER:
        for q in mtm[key][1]:
            test_quotes.setdefault(id(q), q)
    tests = {"TEST": as_records(list(test_quotes.values()))}
    return Partition("global", samples, tests, len(samples), dropped)


RECORD_COLUMNS = ("sample", "price_over_strike", "moneyness", "tau", "target")


def _write_record_csv(path: str, rows: Iterable[tuple[str, Record]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for name, rec in rows:
            writer.writerow([name, repr(rec.price_over_strike), repr(rec.moneyness),
                             repr(rec.tau), repr(rec.target)])


def write_partition(partition: Partition, out_dir: str | os.PathLike) -> list[str]:
    """Write one CSV per named set plus a combined manifest and a meta file.

    Returns the list of written paths.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    all_sets = dict(partition.samples)
    for name, recs in partition.test_sets.items():
        all_sets.setdefault(name, recs)

    for name, recs in all_sets.items():
        path = os.path.join(out_dir, f"{name}.csv")
        _write_record_csv(path, ((name, r) for r in recs))
        written.append(path)

    manifest = os.path.join(out_dir, "partition.csv")
    _write_record_csv(manifest, ((name, r) for name, recs in all_sets.items() for r in recs))
    written.append(manifest)

    meta = os.path.join(out_dir, "partition_meta.txt")
    with open(meta, "w", encoding="utf-8") as fh:
        fh.write(f"scheme={partition.scheme}\n")
        fh.write(f"k={partition.k}\n")
        fh.write(f"dropped={partition.dropped}\n")
        fh.write(f"samples={','.join(partition.samples)}\n")
        fh.write(f"tests={','.join(partition.test_sets)}\n")
    written.append(meta)
    return written


def read_partition(in_dir: str | os.PathLike) -> Partition:
    """Reload a partition written by write_partition."""
    in_dir = os.fspath(in_dir)
    meta_path = os.path.join(in_dir, "partition_meta.txt")
    meta: dict[str, str] = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                meta[key] = value

    by_name: dict[str, list[Record]] = {}
    with open(os.path.join(in_dir, "partition.csv"), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            by_name.setdefault(row["sample"], []).append(Record(
                price_over_strike=float(row["price_over_strike"]),
                moneyness=float(row["moneyness"]),
                tau=float(row["tau"]),
                target=float(row["target"]),
            ))

    sample_names = [n for n in meta["samples"].split(",") if n]
    test_names = [n for n in meta["tests"].split(",") if n]
    samples = {n: tuple(by_name.get(n, ())) for n in sample_names}
    tests = {n: tuple(by_name.get(n, ())) for n in test_names}
    return Partition(meta["scheme"], samples, tests, int(meta["k"]), int(meta["dropped"]))
