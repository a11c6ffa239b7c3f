"""Cyclic-arbitrage candidate detection.

Each transaction's swap events are turned into a token path and a per-token
balance delta, then three filters run in sequence: router/aggregator
exclusion on the first callee, the cycle predicate on the path, and the
profit predicate on the delta. First callees of the survivors are the
candidate bot contracts.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .ingest import LabelSet, SwapEvent, TransactionRecord

log = logging.getLogger(__name__)

TokenPath = tuple[str, ...]
BalanceDelta = dict[str, int]


class DetectionError(ValueError):
    pass


@dataclass(frozen=True)
class Evidence:
    tx_hash: str
    block_number: int
    path: TokenPath
    delta: tuple[tuple[str, int], ...]


@dataclass
class CandidateSet:
    contracts: set[str] = field(default_factory=set)
    evidence: dict[str, list[Evidence]] = field(default_factory=dict)
    evidence_count: dict[str, int] = field(default_factory=dict)
    first_seen_block: dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.contracts)


@dataclass(frozen=True)
class FilterCounts:
    raw: int
    after_router_filter: int
    after_cycle_filter: int
    after_profit_filter: int


def extract_features(trade: Iterable[SwapEvent]) -> tuple[TokenPath, BalanceDelta]:
    swaps = sorted(trade, key=lambda s: s.evt_index)
    if not swaps:
        raise DetectionError("cannot extract features from an empty trade")
    if len({s.evt_index for s in swaps}) != len(swaps):
        raise DetectionError("duplicate evt_index within trade")
    path: list[str] = []
    delta: BalanceDelta = {}
    for s in swaps:
        path += (s.token_sold, s.token_bought)
        delta[s.token_sold] = delta.get(s.token_sold, 0) - s.amount_sold
        delta[s.token_bought] = delta.get(s.token_bought, 0) + s.amount_bought
    return tuple(path), delta


def is_cyclic(path: TokenPath) -> bool:
    n = len(path)
    if n < 2 or n % 2:
        return False
    if path[0] != path[-1]:
        return False
    # bought token of swap j must be the sold token of swap j+1
    return all(path[i] == path[i + 1] for i in range(1, n - 1, 2))


def is_profitable(delta: Mapping[str, int], epsilon: Mapping[str, int] | int = 0) -> bool:
    """All deltas non-negative and at least one strictly positive.

    ``epsilon`` (global int or per-token map) treats ``|delta| <= eps`` as zero,
    for fee-on-transfer dust. The default 0 is exact comparison.
    """
    gained = False
    for token, d in delta.items():
        eps = epsilon if isinstance(epsilon, int) else epsilon.get(token, 0)
        if d < -eps:
            return False
        if d > eps:
            gained = True
    return gained


def filter_router_aggregator(txs: Iterable[TransactionRecord], labels: LabelSet) -> list[TransactionRecord]:
    blocked = labels.intermediaries
    return [t for t in txs if t.to_addr not in blocked]


def detect_candidates(
    txs: Iterable[TransactionRecord],
    swaps: Mapping[str, Iterable[SwapEvent]],
    labels: LabelSet,
    *,
    epsilon: Mapping[str, int] | int = 0,
    evidence_limit: int = 100,
    counts_out: list | None = None,
) -> CandidateSet:
    raw = [t for t in txs if swaps.get(t.hash) and t.to_addr is not None]
    stage1 = filter_router_aggregator(raw, labels)
    stage2, stage3 = [], []
    for t in stage1:
        path, delta = extract_features(swaps[t.hash])
        if not is_cyclic(path):
            continue
        stage2.append(t)
        if is_profitable(delta, epsilon):
            stage3.append((t, path, delta))

    if counts_out is not None:
        counts_out.append(FilterCounts(len(raw), len(stage1), len(stage2), len(stage3)))

    result = CandidateSet()
    per_contract: dict[str, list] = defaultdict(list)
    for t, path, delta in stage3:
        per_contract[t.to_addr].append((t, path, delta))
    for addr in sorted(per_contract):
        entries = sorted(per_contract[addr], key=lambda e: (e[0].block_number, e[0].hash))
        result.contracts.add(addr)
        result.evidence_count[addr] = len(entries)
        result.first_seen_block[addr] = entries[0][0].block_number
        result.evidence[addr] = [
            Evidence(t.hash, t.block_number, path, tuple(sorted(delta.items())))
            for t, path, delta in entries[:evidence_limit]
        ]
    log.info("detector: %d swap txs -> %d candidates", len(raw), len(result.contracts))
    return result


def candidates_to_json(cands: CandidateSet, sample_size: int = 5) -> list[dict]:
    return [
        {
            "address": a,
            "evidence_count": cands.evidence_count[a],
            "first_seen_block": cands.first_seen_block[a],
            "sample_tx_hashes": [e.tx_hash for e in cands.evidence[a][:sample_size]],
        }
        for a in sorted(cands.contracts)
    ]


def candidates_from_json(rows: list[dict]) -> CandidateSet:
    cands = CandidateSet()
    for r in rows:
        a = r["address"]
        cands.contracts.add(a)
        cands.evidence_count[a] = int(r["evidence_count"])
        cands.first_seen_block[a] = int(r["first_seen_block"])
        cands.evidence[a] = [Evidence(h, cands.first_seen_block[a], (), ()) for h in r.get("sample_tx_hashes", [])]
    return cands
