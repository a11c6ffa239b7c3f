"""Deterministic synthetic multi-chain fixture with planted bots and decoys.

Layout per chain: a handful of tokens and pools, one labeled router, one
labeled aggregator, an unlabeled app contract that touches pools without
swapping, and retail EOAs. Planted cyclic-arbitrage bots: one each on
ethereum, arbitrum and optimism, two on base. Decoys: a router-fronted
cyclic trader on base, an aggregator-fronted one on optimism, and a
single-swap trader on base that also lands a few profitable cycles.

Every transaction's intended (purpose, involvement, outcome) label is
recorded at construction time and written to ``truth.json``.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal
from pathlib import Path

from . import ingest
from .ingest import (
    CallType,
    Chain,
    ContractBytecode,
    LabelSet,
    OhlcBar,
    Status,
    SwapEvent,
    TraceCall,
    TransactionRecord,
)
from .opcodes import OPCODES, operand_size

START_DAY = date(2024, 3, 12)
BOTS_PER_CHAIN = {Chain.ETHEREUM: 1, Chain.ARBITRUM: 1, Chain.BASE: 2, Chain.OPTIMISM: 1}
_BLOCK_TIME = {Chain.ETHEREUM: 12, Chain.ARBITRUM: 1, Chain.BASE: 2, Chain.OPTIMISM: 2}
_START_BLOCK = {Chain.ETHEREUM: 19_420_000, Chain.ARBITRUM: 190_000_000, Chain.BASE: 11_900_000, Chain.OPTIMISM: 117_500_000}

SEL_SWAP = bytes.fromhex("022c0d9f")
SEL_GET_RESERVES = bytes.fromhex("0902f1ac")
SEL_SLOT0 = bytes.fromhex("3850c7bd")
SEL_TRANSFER = bytes.fromhex("a9059cbb")


def _addr(*parts) -> str:
    return "0x" + hashlib.sha256("/".join(map(str, parts)).encode()).hexdigest()[:40]


def _random_code(rng: random.Random, n_ops: int) -> bytes:
    ops = sorted(OPCODES)
    out = bytearray()
    for _ in range(n_ops):
        op = rng.choice(ops)
        out.append(op)
        out += bytes(rng.getrandbits(8) for _ in range(operand_size(op)))
    return bytes(out)


@dataclass
class ChainData:
    chain: Chain
    txs: list[TransactionRecord] = field(default_factory=list)
    swaps: dict[str, list[SwapEvent]] = field(default_factory=dict)
    traces: dict[str, list[TraceCall]] = field(default_factory=dict)
    labels: LabelSet = field(default_factory=LabelSet)
    bytecode: list[ContractBytecode] = field(default_factory=list)
    truth: dict[str, tuple[str, str, str]] = field(default_factory=dict)
    bots: list[str] = field(default_factory=list)
    decoys: dict[str, str] = field(default_factory=dict)
    aggregator_trades: dict[str, int] = field(default_factory=dict)


class _Builder:
    def __init__(self, chain: Chain, rng: random.Random):
        self.chain = chain
        self.rng = rng
        self.data = ChainData(chain)
        self._n = 0
        self.tokens = [_addr(chain.value, "token", i) for i in range(4)]
        self.pools = [_addr(chain.value, "pool", i) for i in range(4)]
        self.router = _addr(chain.value, "router")
        self.aggregator = _addr(chain.value, "aggregator")
        self.app = _addr(chain.value, "app")
        self.data.labels = LabelSet(
            routers={self.router}, aggregators={self.aggregator}, dex_pools=set(self.pools)
        )
        self.t0 = int(datetime.combine(START_DAY, time(), tzinfo=timezone.utc).timestamp())

    def _hash(self) -> str:
        self._n += 1
        return "0x" + hashlib.sha256(f"{self.chain.value}/tx/{self._n}".encode()).hexdigest()

    def tx(self, *, frm, to, ts, gas, price, calldata, ok, label, swaps=(), calls=None):
        h = self._hash()
        block = _START_BLOCK[self.chain] + (ts - self.t0) // _BLOCK_TIME[self.chain]
        self.data.txs.append(
            TransactionRecord(h, frm, to, block, ts, gas, price, calldata, Status.SUCCESS if ok else Status.REVERT, self.chain)
        )
        if swaps:
            idx = self.rng.randint(0, 5)
            evts = []
            for sold, bought, a_s, a_b in swaps:
                evts.append(SwapEvent(h, sold, bought, a_s, a_b, idx))
                idx += self.rng.randint(1, 4)
            self.data.swaps[h] = evts
        if calls is not None:
            self.data.traces[h] = [
                TraceCall(h, ct, callee, sel, i) for i, (ct, callee, sel) in enumerate(calls)
            ]
        purpose, involvement, outcome = label
        self.data.truth[h] = (purpose, involvement, outcome)
        return h

    def cycle(self, n_swaps: int, profitable: bool):
        toks = self.rng.sample(self.tokens, n_swaps if n_swaps > 2 else 2)
        path = toks + [toks[0]] if n_swaps > 2 else [toks[0], toks[1], toks[0]]
        amt = self.rng.randint(10**15, 10**18)
        start = amt
        legs = []
        for j in range(n_swaps):
            out = self.rng.randint(10**15, 10**18)
            if j == n_swaps - 1:
                out = start + self.rng.randint(1, 10**14) if profitable else start - self.rng.randint(1, 10**14)
            legs.append((path[j], path[j + 1], amt, out))
            amt = out
        return legs

    def probe_calls(self, contract):
        pools = self.rng.sample(self.pools, 2)
        return [(CallType.CALL, contract, b"")] + [
            (CallType.STATICCALL, p, self.rng.choice([SEL_GET_RESERVES, SEL_SLOT0])) for p in pools
        ]


def _bot_day(b: _Builder, bot: str, eoa: str, day: int, payloads: list[bytes], price: int, gas_scale: int):
    rng = b.rng
    ts = b.t0 + day * 86400 + 3600 * (2 + rng.randint(0, 10))
    label_t = ("CyclicArb", "Trade", "Success")
    for n in (2, 2, 3, 2, 3, 2) + (2,) * rng.randint(0, 4):
        legs = b.cycle(n, profitable=rng.random() < 0.85)
        calls = b.probe_calls(bot) + [(CallType.CALL, rng.choice(b.pools), SEL_SWAP) for _ in legs]
        b.tx(frm=eoa, to=bot, ts=ts, gas=gas_scale * rng.randint(250, 400) * 1000, price=price, calldata=rng.choice(payloads),
             ok=True, label=label_t, swaps=legs, calls=calls)
        ts += rng.randint(2, 5)
    for _ in range(rng.randint(15, 25)):
        b.tx(frm=eoa, to=bot, ts=ts, gas=gas_scale * rng.randint(80, 150) * 1000, price=price, calldata=rng.choice(payloads),
             ok=True, label=("CyclicArb", "Interaction", "Success"), calls=b.probe_calls(bot))
        ts += rng.randint(2, 5)
    for _ in range(rng.randint(2, 5)):
        b.tx(frm=eoa, to=bot, ts=ts, gas=gas_scale * 40_000, price=price, calldata=rng.choice(payloads),
             ok=False, label=("CyclicArb", "Interaction", "Revert"), calls=b.probe_calls(bot))
        ts += rng.randint(2, 5)
    withdraw = SEL_TRANSFER + bytes(32)
    b.tx(frm=eoa, to=bot, ts=ts, gas=60_000, price=price, calldata=withdraw, ok=True,
         label=("CyclicArb", "Residual", "Success"), calls=[(CallType.CALL, bot, b""), (CallType.CALL, b.tokens[0], SEL_TRANSFER)])
    ts += 3
    b.tx(frm=eoa, to=bot, ts=ts, gas=30_000, price=price, calldata=withdraw, ok=False,
         label=("CyclicArb", "Residual", "Revert"), calls=[(CallType.CALL, bot, b"")])


def _retail_day(b: _Builder, day: int, eoas: list[str], price: int):
    rng = b.rng
    day0 = b.t0 + day * 86400

    def ts():
        return day0 + rng.randint(0, 86399)

    def single():
        sold, bought = rng.sample(b.tokens, 2)
        return [(sold, bought, rng.randint(10**15, 10**18), rng.randint(10**15, 10**18))]

    other_trade = ("Other", "Trade", "Success")
    n_router = rng.randint(10, 20)
    n_agg = rng.randint(2, 8)
    for _ in range(n_router):
        pool = rng.choice(b.pools)
        b.tx(frm=rng.choice(eoas), to=b.router, ts=ts(), gas=rng.randint(120, 180) * 1000, price=price + rng.randint(0, price),
             calldata=bytes(rng.getrandbits(8) for _ in range(68)), ok=True, label=other_trade, swaps=single(),
             calls=[(CallType.CALL, b.router, b""), (CallType.CALL, pool, SEL_SWAP)])
    for _ in range(n_agg):
        pool = rng.choice(b.pools)
        b.tx(frm=rng.choice(eoas), to=b.aggregator, ts=ts(), gas=rng.randint(150, 250) * 1000, price=price + rng.randint(0, price),
             calldata=bytes(rng.getrandbits(8) for _ in range(100)), ok=True, label=other_trade, swaps=single(),
             calls=[(CallType.CALL, b.aggregator, b""), (CallType.CALL, pool, SEL_SWAP)])
    for _ in range(rng.randint(2, 6)):
        pool = rng.choice(b.pools)
        b.tx(frm=rng.choice(eoas), to=pool, ts=ts(), gas=rng.randint(90, 130) * 1000, price=price + rng.randint(0, price),
             calldata=SEL_SWAP + bytes(rng.getrandbits(8) for _ in range(64)), ok=True, label=other_trade, swaps=single(),
             calls=[(CallType.CALL, pool, SEL_SWAP)])
    b.data.aggregator_trades[(START_DAY + timedelta(days=day)).isoformat()] = n_agg
    for _ in range(3):
        b.tx(frm=rng.choice(eoas), to=b.router, ts=ts(), gas=rng.randint(40, 90) * 1000, price=price,
             calldata=bytes(rng.getrandbits(8) for _ in range(68)), ok=False, label=("Other", "Interaction", "Revert"),
             calls=[(CallType.CALL, b.router, b""), (CallType.STATICCALL, rng.choice(b.pools), SEL_GET_RESERVES)])
    for _ in range(4):
        b.tx(frm=rng.choice(eoas), to=b.app, ts=ts(), gas=rng.randint(200, 300) * 1000, price=price,
             calldata=bytes(rng.getrandbits(8) for _ in range(36)), ok=True, label=("Other", "Interaction", "Success"),
             calls=[(CallType.CALL, b.app, b""), (CallType.CALL, rng.choice(b.pools), bytes.fromhex("6a627842"))])
    for _ in range(10):
        tok = rng.choice(b.tokens)
        b.tx(frm=rng.choice(eoas), to=tok, ts=ts(), gas=rng.randint(21, 60) * 1000, price=price,
             calldata=SEL_TRANSFER + bytes(rng.getrandbits(8) for _ in range(64)), ok=True, label=("Other", "Residual", "Success"),
             calls=[(CallType.CALL, tok, SEL_TRANSFER)])
    for _ in range(2):
        tok = rng.choice(b.tokens)
        b.tx(frm=rng.choice(eoas), to=tok, ts=ts(), gas=rng.randint(21, 40) * 1000, price=price,
             calldata=SEL_TRANSFER + bytes(64), ok=False, label=("Other", "Residual", "Revert"),
             calls=[(CallType.CALL, tok, SEL_TRANSFER)])
    # contract creation without an exported trace
    b.tx(frm=rng.choice(eoas), to=None, ts=ts(), gas=rng.randint(500, 900) * 1000, price=price,
         calldata=_random_code(rng, 40), ok=True, label=("Other", "Residual", "Success"))


def build_chain(chain: Chain, days: int, rng: random.Random) -> ChainData:
    b = _Builder(chain, rng)
    price = {Chain.ETHEREUM: 10_000_000_000, Chain.ARBITRUM: 10_000_000}.get(chain, 5_000_000)
    eoas = [_addr(chain.value, "eoa", i) for i in range(12)]

    bots = [_addr(chain.value, "bot", i) for i in range(BOTS_PER_CHAIN[chain])]
    b.data.bots = bots
    bot_eoas = [_addr(chain.value, "bot-eoa", i) for i in range(len(bots))]
    payloads = {bot: [bytes(rng.getrandbits(8) for _ in range(rng.choice((2, 40, 100)))) for _ in range(rng.randint(2, 4))] for bot in bots}

    decoy_eoa = _addr(chain.value, "decoy-eoa")
    single = _addr(chain.value, "single-swap-trader")
    if chain is Chain.BASE:
        b.data.decoys = {b.router: "router-fronted", single: "single-swap"}
    elif chain is Chain.OPTIMISM:
        b.data.decoys = {b.aggregator: "aggregator-fronted"}

    for day in range(days):
        _retail_day(b, day, eoas, price)
        for k, (bot, eoa) in enumerate(zip(bots, bot_eoas)):
            _bot_day(b, bot, eoa, day, payloads[bot], max(1, price // 5), gas_scale=3 if k == 0 else 1)
        day0 = b.t0 + day * 86400 + 50_000
        if chain is Chain.BASE:
            # cyclic, profitable, but sent through a labeled router
            for i in range(5):
                legs = b.cycle(2, profitable=True)
                b.tx(frm=decoy_eoa, to=b.router, ts=day0 + 7 * i, gas=300_000, price=price, calldata=bytes(rng.getrandbits(8) for _ in range(68)),
                     ok=True, label=("Other", "Trade", "Success"), swaps=legs,
                     calls=[(CallType.CALL, b.router, b"")] + [(CallType.CALL, rng.choice(b.pools), SEL_SWAP) for _ in legs])
            # mostly single swaps, a couple of profitable cycles, heavy gas
            for i in range(40):
                legs = b.cycle(2, profitable=True) if i % 20 == 0 else [(b.tokens[0], b.tokens[1], 10**18, 3 * 10**18)]
                b.tx(frm=_addr(chain.value, "single-eoa"), to=single, ts=day0 + 1000 + 4 * i, gas=1_500_000, price=price,
                     calldata=bytes.fromhex("12345678") + i.to_bytes(32, "big"), ok=True, label=("Other", "Trade", "Success"),
                     swaps=legs, calls=[(CallType.CALL, single, b"")] + [(CallType.CALL, b.pools[0], SEL_SWAP) for _ in legs])
        elif chain is Chain.OPTIMISM:
            for i in range(5):
                legs = b.cycle(3, profitable=True)
                b.tx(frm=decoy_eoa, to=b.aggregator, ts=day0 + 9 * i, gas=350_000, price=price, calldata=bytes(rng.getrandbits(8) for _ in range(120)),
                     ok=True, label=("Other", "Trade", "Success"), swaps=legs,
                     calls=[(CallType.CALL, b.aggregator, b"")] + [(CallType.CALL, rng.choice(b.pools), SEL_SWAP) for _ in legs])
            key = (START_DAY + timedelta(days=day)).isoformat()
            b.data.aggregator_trades[key] += 5

    b.data.txs.sort(key=lambda t: (t.timestamp, t.hash))
    code = {bot: _random_code(rng, 300 + 50 * i) for i, bot in enumerate(bots)}
    if chain is Chain.BASE:
        code[bots[1]] = code[bots[0]]  # clone pair
        code[single] = _random_code(rng, 200)
    b.data.bytecode = [ContractBytecode(a, code[a]) for a in sorted(code)]
    return b.data


def build_ohlc(days: int, rng: random.Random) -> list[OhlcBar]:
    bars = []
    px = 4000.0
    for d in range(days):
        o = px
        c = o * (1 + rng.uniform(-0.05, 0.05))
        h = max(o, c) * (1 + rng.uniform(0, 0.03))
        low = min(o, c) * (1 - rng.uniform(0, 0.03))
        q = Decimal("0.01")
        O, H, L, C = (Decimal(repr(v)).quantize(q) for v in (o, h, low, c))
        H = max(H, O, C)
        L = min(L, O, C)
        bars.append(OhlcBar(START_DAY + timedelta(days=d), O, H, L, C))
        px = float(C)
    return bars


def build_fixture(days: int = 3, seed: int = 7) -> tuple[dict[Chain, ChainData], list[OhlcBar]]:
    rng = random.Random(seed)
    chains = {c: build_chain(c, days, rng) for c in (Chain.ETHEREUM, Chain.ARBITRUM, Chain.BASE, Chain.OPTIMISM)}
    return chains, build_ohlc(days, rng)


CONFIG_TEMPLATE = """\
[pipeline]
chains = ethereum, arbitrum, base, optimism
output_dir = out
event_date = 2024-03-13
workers = 1

[inputs]
transactions = data/{chain}/transactions.jsonl
swaps = data/{chain}/swaps.jsonl
traces = data/{chain}/traces.jsonl
labels = data/{chain}/labels.csv
bytecode = data/{chain}/bytecode.jsonl
ohlc = data/ohlc.csv

[thresholds]
dex_interaction_min = 0.6
eoa_max = 3
human_median_gap_s = 30
human_burst_window_s = 60
human_burst_max = 10
gas_coverage = 0.8
dust_epsilon = 0
ngram_n = 5
evidence_limit = 100
allow_date_gaps = false
"""


def write_fixture(out_dir, days: int = 3, seed: int = 7) -> Path:
    """Write data files, ``truth.json`` and ``optimev.ini`` under ``out_dir``."""
    out_dir = Path(out_dir)
    chains, ohlc = build_fixture(days, seed)
    truth = {}
    for chain, cd in chains.items():
        d = out_dir / "data" / chain.value
        d.mkdir(parents=True, exist_ok=True)
        with (d / "transactions.jsonl").open("w") as fh:
            ingest.dump_transactions(cd.txs, fh)
        with (d / "swaps.jsonl").open("w") as fh:
            ingest.dump_swaps(cd.swaps, fh)
        with (d / "traces.jsonl").open("w") as fh:
            ingest.dump_traces(cd.traces, fh)
        with (d / "labels.csv").open("w") as fh:
            ingest.dump_labels(cd.labels, fh)
        with (d / "bytecode.jsonl").open("w") as fh:
            ingest.dump_bytecode(cd.bytecode, fh)
        truth[chain.value] = {
            "bots": sorted(cd.bots),
            "decoys": cd.decoys,
            "labels": {h: list(v) for h, v in sorted(cd.truth.items())},
            "aggregator_trades": cd.aggregator_trades,
        }
    with (out_dir / "data" / "ohlc.csv").open("w") as fh:
        ingest.dump_ohlc(ohlc, fh)
    (out_dir / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    cfg = out_dir / "optimev.ini"
    cfg.write_text(CONFIG_TEMPLATE)
    return cfg
