"""Automated screening of candidate contracts.

Candidates are ranked by the gas consumed in transactions addressed to them
and screened one by one until the validated contracts account for more than
the configured share of (non-excluded) candidate gas. Screens:

* external exclusion label
* DEX-interaction rate of non-trading transactions below a floor
* many distinct callers whose timing looks human
* P10 or P25 of swaps-per-trading-tx equal to one
"""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .detector import CandidateSet
from .ingest import SwapEvent, TraceCall, TransactionRecord

PERCENTILES = (0.10, 0.25, 0.50, 0.75, 0.90)


class Verdict(str, enum.Enum):
    VALIDATED = "Validated"
    EXCLUDED = "Excluded"
    UNREVIEWED = "Unreviewed"


class InapplicableScreen(ValueError):
    """The screen has no data to work with (e.g. no trading transactions)."""


@dataclass(frozen=True)
class Thresholds:
    dex_interaction_min: float = 0.6
    eoa_max: int = 3
    human_median_gap_s: float = 30.0
    human_burst_window_s: int = 60
    human_burst_max: int = 10
    gas_coverage: float = 0.8


@dataclass
class ValidationReport:
    address: str
    dex_interaction_rate: float
    distinct_eoas: int
    human_plausible: bool
    swap_percentiles: tuple[int, ...] | None
    gas_used_total: int
    verdict: Verdict = Verdict.UNREVIEWED
    reasons: list[str] = field(default_factory=list)


def nearest_rank(sorted_values: Sequence, q: float):
    """Value at 1-based rank ceil(q*n) of an ascending sequence."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of empty sequence")
    # round before ceil so that e.g. 0.1*10 does not become rank 2
    rank = max(1, math.ceil(round(q * n, 9)))
    return sorted_values[min(rank, n) - 1]


def _by_callee(txs: Iterable[TransactionRecord], contract: str) -> list[TransactionRecord]:
    return [t for t in txs if t.to_addr == contract]


def dex_interaction_rate(
    contract: str,
    txs: Iterable[TransactionRecord],
    traces: Mapping[str, Sequence[TraceCall]],
    pools: set[str],
    swaps: Mapping[str, object] | None = None,
) -> float:
    """Share of the contract's swap-free transactions whose trace touches a pool.

    Returns 1.0 when the contract has no swap-free transactions.
    """
    swaps = swaps or {}
    non_trading = [t for t in _by_callee(txs, contract) if not swaps.get(t.hash)]
    if not non_trading:
        return 1.0
    touching = sum(
        1 for t in non_trading if any(c.callee in pools for c in traces.get(t.hash, ()))
    )
    return touching / len(non_trading)


def caller_profile(
    contract: str, txs: Iterable[TransactionRecord], th: Thresholds = Thresholds()
) -> tuple[int, bool]:
    mine = _by_callee(txs, contract)
    if not mine:
        return 0, False
    eoas = len({t.from_addr for t in mine})
    stamps = sorted(t.timestamp for t in mine)
    if len(stamps) > 1:
        gaps = sorted(b - a for a, b in zip(stamps, stamps[1:]))
        slow = nearest_rank(gaps, 0.5) > th.human_median_gap_s
    else:
        slow = True
    # max number of txs in any half-open window [t, t + window)
    burst, j = 0, 0
    for i, t0 in enumerate(stamps):
        while j < len(stamps) and stamps[j] < t0 + th.human_burst_window_s:
            j += 1
        burst = max(burst, j - i)
    return eoas, slow and burst <= th.human_burst_max


def swap_counts(contract: str, txs: Iterable[TransactionRecord], swaps_by_tx: Mapping[str, Iterable[SwapEvent]]) -> list[int]:
    return sorted(len(swaps_by_tx[t.hash]) for t in _by_callee(txs, contract) if swaps_by_tx.get(t.hash))


def swap_count_percentiles(
    contract: str, txs: Iterable[TransactionRecord], swaps_by_tx: Mapping[str, Iterable[SwapEvent]]
) -> tuple[int, ...]:
    counts = swap_counts(contract, txs, swaps_by_tx)
    if not counts:
        raise InapplicableScreen(f"{contract} has no trading transactions")
    return tuple(nearest_rank(counts, q) for q in PERCENTILES)


def _score(addr, txs, traces, swaps, pools, exclusions, th) -> ValidationReport:
    try:
        pct = swap_count_percentiles(addr, txs, swaps)
    except InapplicableScreen:
        pct = None
    eoas, human = caller_profile(addr, txs, th)
    return ValidationReport(
        address=addr,
        dex_interaction_rate=dex_interaction_rate(addr, txs, traces, pools, swaps),
        distinct_eoas=eoas,
        human_plausible=human,
        swap_percentiles=pct,
        gas_used_total=sum(t.gas_used for t in txs if t.to_addr == addr),
    )


def _screen(rep: ValidationReport, exclusions: Mapping[str, str], th: Thresholds) -> list[str]:
    reasons = []
    if rep.address in exclusions:
        reasons.append(f"exclusion label: {exclusions[rep.address]}")
    if rep.dex_interaction_rate < th.dex_interaction_min:
        reasons.append(f"dex interaction rate {rep.dex_interaction_rate:.4f} below {th.dex_interaction_min}")
    if rep.distinct_eoas > th.eoa_max and rep.human_plausible:
        reasons.append(f"{rep.distinct_eoas} distinct EOAs with human-plausible timing")
    if rep.swap_percentiles is not None and (rep.swap_percentiles[0] == 1 or rep.swap_percentiles[1] == 1):
        reasons.append("single-swap percentile screen")
    return reasons


def validate(
    candidates: CandidateSet,
    txs: Sequence[TransactionRecord],
    traces: Mapping[str, Sequence[TraceCall]],
    swaps: Mapping[str, Iterable[SwapEvent]],
    pools: set[str],
    exclusions: Mapping[str, str],
    th: Thresholds = Thresholds(),
) -> tuple[set[str], list[ValidationReport], float]:
    """Screen candidates in descending gas order until coverage is reached.

    Returns (bot set, reports in ranking order, coverage), where coverage is
    Validated gas over non-excluded candidate gas when the loop stopped. The
    bot set holds Validated and Unreviewed contracts.
    """
    cand = set(candidates.contracts)
    relevant = [t for t in txs if t.to_addr in cand]
    by_addr: dict[str, list[TransactionRecord]] = defaultdict(list)
    for t in relevant:
        by_addr[t.to_addr].append(t)

    reports = [_score(a, by_addr.get(a, []), traces, swaps, pools, exclusions, th) for a in sorted(cand)]
    reports.sort(key=lambda r: (-r.gas_used_total, r.address))

    remaining_gas = sum(r.gas_used_total for r in reports)
    validated_gas = 0
    coverage = 0.0
    done = False
    for rep in reports:
        if done:
            rep.verdict = Verdict.UNREVIEWED
            continue
        reasons = _screen(rep, exclusions, th)
        if reasons:
            rep.verdict = Verdict.EXCLUDED
            rep.reasons = reasons
            remaining_gas -= rep.gas_used_total
        else:
            rep.verdict = Verdict.VALIDATED
            validated_gas += rep.gas_used_total
        coverage = validated_gas / remaining_gas if remaining_gas else 0.0
        if coverage > th.gas_coverage:
            done = True

    bots = {r.address for r in reports if r.verdict is not Verdict.EXCLUDED}
    return bots, reports, coverage


REPORT_COLUMNS = [
    "address",
    "verdict",
    "gas_used_total",
    "dex_interaction_rate",
    "distinct_eoas",
    "human_plausible",
    "p10",
    "p25",
    "p50",
    "p75",
    "p90",
    "reasons",
]


def write_report(reports: Sequence[ValidationReport], validated_coverage: float, fh: IO[str]):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        pct = list(r.swap_percentiles) if r.swap_percentiles else [""] * 5
        w.writerow(
            [
                r.address,
                r.verdict.value,
                str(r.gas_used_total),
                f"{r.dex_interaction_rate:.6f}",
                r.distinct_eoas,
                str(r.human_plausible).lower(),
                *pct,
                "; ".join(r.reasons),
            ]
        )
    w.writerow(["#coverage", f"{validated_coverage:.6f}"] + [""] * (len(REPORT_COLUMNS) - 2))


def read_report(fh: IO[str]) -> tuple[list[ValidationReport], float]:
    reports, coverage = [], float("nan")
    for rec in csv.DictReader(fh):
        if rec["address"] == "#coverage":
            coverage = float(rec["verdict"])
            continue
        pct = tuple(int(rec[k]) for k in ("p10", "p25", "p50", "p75", "p90")) if rec["p10"] else None
        reports.append(
            ValidationReport(
                address=rec["address"],
                dex_interaction_rate=float(rec["dex_interaction_rate"]),
                distinct_eoas=int(rec["distinct_eoas"]),
                human_plausible=rec["human_plausible"] == "true",
                swap_percentiles=pct,
                gas_used_total=int(rec["gas_used_total"]),
                verdict=Verdict(rec["verdict"]),
                reasons=[s for s in rec["reasons"].split("; ") if s],
            )
        )
    return reports, coverage


def bots_from_reports(reports: Iterable[ValidationReport]) -> set[str]:
    return {r.address for r in reports if r.verdict is not Verdict.EXCLUDED}
