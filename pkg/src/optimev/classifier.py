"""Per-transaction classification along purpose, DEX involvement and outcome."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .ingest import Status, SwapEvent, TraceCall, TransactionRecord

log = logging.getLogger(__name__)


class Purpose(str, enum.Enum):
    CYCLIC_ARB = "CyclicArb"
    OTHER = "Other"


class Involvement(str, enum.Enum):
    TRADE = "Trade"
    INTERACTION = "Interaction"
    RESIDUAL = "Residual"


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    REVERT = "Revert"


class ConsistencyError(ValueError):
    """Input data contradicts itself (e.g. a reverted tx that emitted swaps)."""


@dataclass(frozen=True)
class ClassifiedTx:
    hash: str
    purpose: Purpose
    involvement: Involvement
    outcome: Outcome

    @property
    def category(self) -> str:
        return f"{self.purpose.value}-{self.involvement.value}-{self.outcome.value}"


# Trade implies Success, so 10 of the 12 combinations are reachable.
REACHABLE = tuple(
    (p, i, o)
    for p in Purpose
    for i in Involvement
    for o in Outcome
    if not (i is Involvement.TRADE and o is Outcome.REVERT)
)


@dataclass
class ClassifyStats:
    missing_traces: int = 0
    counts: dict[str, int] = field(default_factory=dict)


def classify_purpose(tx: TransactionRecord, bots) -> Purpose:
    if tx.to_addr is not None and tx.to_addr in bots:
        return Purpose.CYCLIC_ARB
    return Purpose.OTHER


def classify_involvement(
    tx: TransactionRecord,
    swaps: Mapping[str, Iterable[SwapEvent]],
    traces: Mapping[str, Sequence[TraceCall]],
    pools: set[str],
    stats: ClassifyStats | None = None,
) -> Involvement:
    if swaps.get(tx.hash):
        return Involvement.TRADE
    calls = traces.get(tx.hash)
    if calls is None:
        if stats is not None:
            stats.missing_traces += 1
        return Involvement.RESIDUAL
    if any(c.callee in pools for c in calls):
        return Involvement.INTERACTION
    return Involvement.RESIDUAL


def classify_outcome(tx: TransactionRecord) -> Outcome:
    return Outcome.SUCCESS if tx.status is Status.SUCCESS else Outcome.REVERT


def classify_one(tx, swaps, traces, pools, bots, stats=None) -> ClassifiedTx:
    involvement = classify_involvement(tx, swaps, traces, pools, stats)
    outcome = classify_outcome(tx)
    if involvement is Involvement.TRADE and outcome is Outcome.REVERT:
        raise ConsistencyError(f"transaction {tx.hash} reverted but emitted swap events")
    return ClassifiedTx(tx.hash, classify_purpose(tx, bots), involvement, outcome)


def classify_all(
    txs: Iterable[TransactionRecord],
    swaps: Mapping[str, Iterable[SwapEvent]],
    traces: Mapping[str, Sequence[TraceCall]],
    pools: set[str],
    bots,
    stats: ClassifyStats | None = None,
) -> list[ClassifiedTx]:
    """Classify every transaction; output order follows input order."""
    stats = stats if stats is not None else ClassifyStats()
    bots = frozenset(bots)
    out = [classify_one(t, swaps, traces, pools, bots, stats) for t in txs]
    if stats.missing_traces:
        log.warning("%d swap-free transactions had no trace; labelled Residual", stats.missing_traces)
    return out


def write_classified(rows: Iterable[ClassifiedTx], fh: IO[str]):
    for c in rows:
        fh.write(
            json.dumps(
                {"hash": c.hash, "purpose": c.purpose.value, "involvement": c.involvement.value, "outcome": c.outcome.value},
                separators=(",", ":"),
            )
            + "\n"
        )


def read_classified(fh: IO[str]) -> Iterator[ClassifiedTx]:
    for line in fh:
        if line.strip():
            o = json.loads(line)
            yield ClassifiedTx(o["hash"], Purpose(o["purpose"]), Involvement(o["involvement"]), Outcome(o["outcome"]))
