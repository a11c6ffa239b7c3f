"""Aggregation of classified transactions into daily and per-bot tables.

All gas and fee arithmetic is done on Python ints. Partial aggregates keep
gas prices as a multiset so that partitions can be merged in any order and
medians are taken only after the merge.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .classifier import REACHABLE, ClassifiedTx, Involvement, Outcome, Purpose
from .ingest import Chain, SwapEvent, TransactionRecord
from .validator import nearest_rank

TOTAL = "Total"
TRIPLES = tuple(f"{p.value}-{i.value}-{o.value}" for p, i, o in REACHABLE)
PAIRS = tuple(f"{p.value}-{i.value}" for p in Purpose for i in Involvement)
PURPOSES = tuple(p.value for p in Purpose)
CATEGORIES = TRIPLES + PAIRS + PURPOSES + (TOTAL,)


class MetricsError(ValueError):
    pass


@dataclass
class CategoryStats:
    gas_used: int = 0
    tx_count: int = 0
    fees_paid: int = 0
    gas_prices: Counter = field(default_factory=Counter)

    def add(self, tx: TransactionRecord):
        self.gas_used += tx.gas_used
        self.tx_count += 1
        self.fees_paid += tx.fee
        self.gas_prices[tx.gas_price] += 1

    def merge(self, other: "CategoryStats") -> "CategoryStats":
        return CategoryStats(
            self.gas_used + other.gas_used,
            self.tx_count + other.tx_count,
            self.fees_paid + other.fees_paid,
            self.gas_prices + other.gas_prices,
        )

    @property
    def median_gas_price(self) -> int | None:
        if not self.tx_count:
            return None
        rank = max(1, -(-self.tx_count // 2))
        seen = 0
        for price in sorted(self.gas_prices):
            seen += self.gas_prices[price]
            if seen >= rank:
                return price
        raise AssertionError("unreachable")

    @property
    def mean_gas_price(self) -> Fraction | None:
        if not self.tx_count:
            return None
        return Fraction(sum(p * c for p, c in self.gas_prices.items()), self.tx_count)

    @property
    def gas_weighted_price(self) -> Fraction | None:
        return Fraction(self.fees_paid, self.gas_used) if self.gas_used else None


@dataclass
class DailyAggregate:
    chain: Chain
    date: date
    categories: dict[str, CategoryStats] = field(default_factory=dict)

    def get(self, category: str) -> CategoryStats:
        return self.categories.get(category) or CategoryStats()

    def merge(self, other: "DailyAggregate") -> "DailyAggregate":
        cats = {}
        for k in set(self.categories) | set(other.categories):
            cats[k] = self.get(k).merge(other.get(k))
        return DailyAggregate(self.chain, self.date, cats)

    def gas_share(self, category: str) -> Fraction:
        total = self.get(TOTAL).gas_used
        return Fraction(self.get(category).gas_used, total) if total else Fraction(0)

    def fee_share(self, category: str) -> Fraction:
        total = self.get(TOTAL).fees_paid
        return Fraction(self.get(category).fees_paid, total) if total else Fraction(0)


def _categories_of(c: ClassifiedTx) -> tuple[str, ...]:
    p, i, o = c.purpose.value, c.involvement.value, c.outcome.value
    return (f"{p}-{i}-{o}", f"{p}-{i}", p, TOTAL)


Partial = dict[tuple[Chain, date], DailyAggregate]


def partial_aggregate(pairs: Iterable[tuple[ClassifiedTx, TransactionRecord]]) -> Partial:
    out: Partial = {}
    for c, tx in pairs:
        if c.hash != tx.hash:
            raise MetricsError(f"classification {c.hash} paired with transaction {tx.hash}")
        key = (tx.chain, tx.day)
        agg = out.get(key)
        if agg is None:
            agg = out[key] = DailyAggregate(tx.chain, tx.day)
        for cat in _categories_of(c):
            agg.categories.setdefault(cat, CategoryStats()).add(tx)
    return out


def merge_partials(a: Partial, b: Partial) -> Partial:
    out = dict(a)
    for k, v in b.items():
        out[k] = out[k].merge(v) if k in out else v
    return out


def _pair(classified, txs):
    by_hash = {t.hash: t for t in txs}
    try:
        return [(c, by_hash[c.hash]) for c in classified]
    except KeyError as exc:
        raise MetricsError(f"classified transaction {exc.args[0]} missing from transactions") from None


def aggregate_daily(
    classified: Iterable[ClassifiedTx], txs: Iterable[TransactionRecord], workers: int = 1
) -> list[DailyAggregate]:
    pairs = _pair(classified, txs)
    if workers > 1 and len(pairs) > 50_000:
        size = -(-len(pairs) // workers)
        chunks = [pairs[i : i + size] for i in range(0, len(pairs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial_aggregate, chunks))
    else:
        parts = [partial_aggregate(pairs)]
    merged: Partial = {}
    for p in parts:
        merged = merge_partials(merged, p)
    return [merged[k] for k in sorted(merged, key=lambda k: (k[0].value, k[1]))]


def normalize_to_event(series: Mapping[date, int | float], event_date: date) -> dict[date, float]:
    if event_date not in series:
        raise MetricsError(f"event date {event_date} not in series")
    base = series[event_date]
    if base == 0:
        raise MetricsError(f"series is zero on event date {event_date}")
    return {d: v / base for d, v in sorted(series.items())}


@dataclass(frozen=True)
class OutcomeDistribution:
    trade: int
    interaction_success: int
    revert: int

    @property
    def total(self) -> int:
        return self.trade + self.interaction_success + self.revert

    def fractions(self) -> tuple[Fraction, Fraction, Fraction]:
        n = self.total
        return Fraction(self.trade, n), Fraction(self.interaction_success, n), Fraction(self.revert, n)


def outcome_distribution(classified: Iterable[ClassifiedTx]) -> OutcomeDistribution:
    """Outcome mix of bot transactions that trade or interact with a DEX."""
    trade = succ = rev = 0
    for c in classified:
        if c.purpose is not Purpose.CYCLIC_ARB or c.involvement is Involvement.RESIDUAL:
            continue
        if c.involvement is Involvement.TRADE:
            trade += 1
        elif c.outcome is Outcome.SUCCESS:
            succ += 1
        else:
            rev += 1
    if trade + succ + rev == 0:
        raise MetricsError("no cyclic-arbitrage DEX transactions in scope")
    return OutcomeDistribution(trade, succ, rev)


@dataclass
class BotStats:
    contract: str
    swaps: int
    txs_with_trades: int
    non_reverted_txs: int
    reverted_txs: int
    unique_calldata: int
    median_calldata_length: int
    gas_used: int
    cumulative_gas_pct: Fraction = Fraction(0)

    @property
    def total_txs(self) -> int:
        return self.non_reverted_txs + self.reverted_txs

    @property
    def txs_per_unique_calldata(self) -> Fraction:
        return Fraction(self.total_txs, self.unique_calldata)


def bot_stats_table(
    bots: Iterable[str],
    txs: Iterable[TransactionRecord],
    swaps: Mapping[str, Iterable[SwapEvent]],
) -> list[BotStats]:
    bots = set(bots)
    by_bot: dict[str, list[TransactionRecord]] = defaultdict(list)
    for t in txs:
        if t.to_addr in bots:
            by_bot[t.to_addr].append(t)
    rows = []
    for addr, mine in by_bot.items():
        trades = [len(swaps[t.hash]) for t in mine if swaps.get(t.hash)]
        reverted = sum(1 for t in mine if t.status.value == "revert")
        rows.append(
            BotStats(
                contract=addr,
                swaps=sum(trades),
                txs_with_trades=len(trades),
                non_reverted_txs=len(mine) - reverted,
                reverted_txs=reverted,
                unique_calldata=len({t.calldata for t in mine}),
                median_calldata_length=nearest_rank(sorted(2 * len(t.calldata) for t in mine), 0.5),
                gas_used=sum(t.gas_used for t in mine),
            )
        )
    rows.sort(key=lambda r: (-r.gas_used, r.contract))
    total = sum(r.gas_used for r in rows)
    running = 0
    for r in rows:
        running += r.gas_used
        r.cumulative_gas_pct = Fraction(100 * running, total) if total else Fraction(0)
    return rows


@dataclass(frozen=True)
class RevertShare:
    chain: Chain
    date: date
    reverts: int
    cyclic_arb: Fraction
    other: Fraction

    @property
    def flagged(self) -> bool:
        return self.reverts == 0


def revert_share(classified: Iterable[ClassifiedTx], txs: Iterable[TransactionRecord]) -> list[RevertShare]:
    days: dict[tuple[Chain, date], list[int]] = {}
    for c, tx in _pair(classified, txs):
        bucket = days.setdefault((tx.chain, tx.day), [0, 0])
        if c.outcome is Outcome.REVERT:
            bucket[0 if c.purpose is Purpose.CYCLIC_ARB else 1] += 1
    out = []
    for (chain, d), (bot, other) in sorted(days.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        n = bot + other
        out.append(
            RevertShare(chain, d, n, Fraction(bot, n) if n else Fraction(0), Fraction(other, n) if n else Fraction(0))
        )
    return out


def single_swap_dominance(contract: str, txs: Iterable[TransactionRecord], swaps_by_tx: Mapping[str, Iterable[SwapEvent]]) -> Fraction:
    counts = [len(swaps_by_tx[t.hash]) for t in txs if t.to_addr == contract and swaps_by_tx.get(t.hash)]
    if not counts:
        raise MetricsError(f"{contract} has no trading transactions")
    return Fraction(sum(1 for n in counts if n == 1), len(counts))


@dataclass(frozen=True)
class SingleSwapRow:
    contract: str
    gas_used: int
    trading_txs: int
    single_swap_fraction: Fraction

    @property
    def corroborates_non_cyclic(self) -> bool:
        return self.single_swap_fraction >= Fraction(98, 100)


def single_swap_screen(
    bots: Iterable[str],
    txs: Sequence[TransactionRecord],
    swaps_by_tx: Mapping[str, Iterable[SwapEvent]],
    gas_share: Fraction = Fraction(1, 2),
) -> list[SingleSwapRow]:
    """Check the non-bot callees that make up the top ``gas_share`` of non-bot trading-contract gas."""
    bots = set(bots)
    gas: Counter = Counter()
    trading: dict[str, list[TransactionRecord]] = defaultdict(list)
    for t in txs:
        if t.to_addr is None or t.to_addr in bots:
            continue
        gas[t.to_addr] += t.gas_used
        if swaps_by_tx.get(t.hash):
            trading[t.to_addr].append(t)
    ranked = sorted(trading, key=lambda a: (-gas[a], a))
    total = sum(gas[a] for a in ranked)
    out, running = [], 0
    for a in ranked:
        if total and Fraction(running, total) >= gas_share:
            break
        running += gas[a]
        out.append(SingleSwapRow(a, gas[a], len(trading[a]), single_swap_dominance(a, trading[a], swaps_by_tx)))
    return out


# ---------------------------------------------------------------------------
# CSV emission


def fmt(x, places: int = 6) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        d = Decimal(x.numerator) / Decimal(x.denominator)
    else:
        d = Decimal(repr(x))
    return str(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def _writer(path: Path):
    fh = path.open("w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_daily_gas(aggs: Sequence[DailyAggregate], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["date", "chain", "category", "gas_used", "tx_count", "fees_paid_wei", "median_gas_price_wei", "mean_gas_price_wei"])
        for a in aggs:
            for cat in CATEGORIES:
                s = a.get(cat)
                w.writerow([a.date, a.chain.value, cat, s.gas_used, s.tx_count, s.fees_paid, fmt(s.median_gas_price), fmt(s.mean_gas_price, 3)])


def write_daily_shares(aggs: Sequence[DailyAggregate], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["date", "chain", "category", "gas_share", "fee_share"])
        for a in aggs:
            for cat in TRIPLES + PAIRS + PURPOSES:
                w.writerow([a.date, a.chain.value, cat, fmt(a.gas_share(cat), 9), fmt(a.fee_share(cat), 9)])


def write_normalized_growth(aggs: Sequence[DailyAggregate], event_date: date, path: Path) -> list[str]:
    """Gas per purpose and total, each divided by its event-day value. Returns skipped-series notes."""
    notes = []
    fh, w = _writer(path)
    with fh:
        w.writerow(["date", "chain", "series", "gas_used", "ratio_to_event"])
        for chain in sorted({a.chain for a in aggs}, key=lambda c: c.value):
            mine = [a for a in aggs if a.chain is chain]
            for series in PURPOSES + (TOTAL,):
                values = {a.date: a.get(series).gas_used for a in mine}
                try:
                    ratios = normalize_to_event(values, event_date)
                except MetricsError as exc:
                    notes.append(f"{chain.value}/{series}: {exc}")
                    continue
                for d in sorted(values):
                    w.writerow([d, chain.value, series, values[d], fmt(ratios[d], 9)])
    return notes


def write_gas_price_stats(aggs: Sequence[DailyAggregate], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["date", "chain", "purpose", "tx_count", "median_gas_price_wei", "mean_gas_price_wei", "gas_weighted_price_wei"])
        for a in aggs:
            for p in PURPOSES:
                s = a.get(p)
                w.writerow([a.date, a.chain.value, p, s.tx_count, fmt(s.median_gas_price), fmt(s.mean_gas_price, 3), fmt(s.gas_weighted_price, 3)])


def write_fee_gas_share(aggs: Sequence[DailyAggregate], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["chain", "purpose", "gas_used", "fees_paid_wei", "gas_share", "fee_share"])
        for chain in sorted({a.chain for a in aggs}, key=lambda c: c.value):
            tot = CategoryStats()
            per = {p: CategoryStats() for p in PURPOSES}
            for a in aggs:
                if a.chain is chain:
                    tot = tot.merge(a.get(TOTAL))
                    for p in PURPOSES:
                        per[p] = per[p].merge(a.get(p))
            for p in PURPOSES:
                gs = Fraction(per[p].gas_used, tot.gas_used) if tot.gas_used else Fraction(0)
                fs = Fraction(per[p].fees_paid, tot.fees_paid) if tot.fees_paid else Fraction(0)
                w.writerow([chain.value, p, per[p].gas_used, per[p].fees_paid, fmt(gs, 9), fmt(fs, 9)])


def write_outcome_distribution(chain: Chain, dist: OutcomeDistribution | None, path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["chain", "trade", "interaction_success", "revert", "trade_frac", "interaction_success_frac", "revert_frac"])
        if dist is not None:
            w.writerow([chain.value, dist.trade, dist.interaction_success, dist.revert, *(fmt(f, 9) for f in dist.fractions())])


def write_bot_stats(rows: Sequence[BotStats], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow([
            "contract", "swaps", "txs_with_trades", "non_reverted_txs", "reverted_txs",
            "txs_per_unique_calldata", "median_calldata_length", "gas_used", "cumulative_gas_pct",
        ])
        for r in rows:
            w.writerow([
                r.contract, r.swaps, r.txs_with_trades, r.non_reverted_txs, r.reverted_txs,
                fmt(r.txs_per_unique_calldata, 2), r.median_calldata_length, r.gas_used, fmt(r.cumulative_gas_pct, 2),
            ])


def write_revert_share(rows: Sequence[RevertShare], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["date", "chain", "reverts", "cyclic_arb_share", "other_share", "no_reverts"])
        for r in rows:
            w.writerow([r.date, r.chain.value, r.reverts, fmt(r.cyclic_arb, 9), fmt(r.other, 9), str(r.flagged).lower()])


def write_single_swap(rows: Sequence[SingleSwapRow], path: Path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["contract", "gas_used", "trading_txs", "single_swap_fraction", "corroborates_non_cyclic"])
        for r in rows:
            w.writerow([r.contract, r.gas_used, r.trading_txs, fmt(r.single_swap_fraction, 6), str(r.corroborates_non_cyclic).lower()])
