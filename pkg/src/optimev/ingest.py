"""Data model and loaders for chain-data exports.

Transactions, swaps, traces and bytecode are newline-delimited JSON; labels
and OHLC bars are CSV. Addresses are normalized to lowercase ``0x`` hex on
load, integer quantities stay as Python ints (arbitrary precision), and
block times are converted to UTC epoch seconds.

Every loader has a matching ``dump_*`` writer that emits the canonical form,
so ``load(dump(load(x))) == load(x)``.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Iterable, Iterator

_HEX_RE = re.compile(r"^(0x)?[0-9a-fA-F]*$")


class IngestError(ValueError):
    """Malformed or inconsistent input record."""

    def __init__(self, path, line: int | None, field_name: str | None, msg: str):
        self.path = str(path)
        self.line = line
        self.field_name = field_name
        where = self.path
        if line is not None:
            where += f":{line}"
        if field_name:
            where += f" [{field_name}]"
        super().__init__(f"{where}: {msg}")


class Chain(str, enum.Enum):
    ETHEREUM = "ethereum"
    ARBITRUM = "arbitrum"
    BASE = "base"
    OPTIMISM = "optimism"

    @classmethod
    def parse(cls, value) -> "Chain":
        if isinstance(value, Chain):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown chain {value!r}") from None


class Status(str, enum.Enum):
    SUCCESS = "success"
    REVERT = "revert"


class CallType(str, enum.Enum):
    CALL = "call"
    STATICCALL = "staticcall"
    DELEGATECALL = "delegatecall"
    CALLCODE = "callcode"
    CREATE = "create"


@dataclass(frozen=True)
class SwapEvent:
    tx_hash: str
    token_sold: str
    token_bought: str
    amount_sold: int
    amount_bought: int
    evt_index: int

    def __post_init__(self):
        if self.amount_sold <= 0 or self.amount_bought <= 0:
            raise ValueError("swap amounts must be positive")
        if self.token_sold == self.token_bought:
            raise ValueError("token_sold equals token_bought")
        if self.evt_index < 0:
            raise ValueError("evt_index must be non-negative")


@dataclass(frozen=True)
class TransactionRecord:
    hash: str
    from_addr: str
    to_addr: str | None  # None for contract creation
    block_number: int
    timestamp: int
    gas_used: int
    gas_price: int
    calldata: bytes
    status: Status
    chain: Chain

    @property
    def day(self) -> date:
        return utc_day(self.timestamp)

    @property
    def fee(self) -> int:
        return self.gas_used * self.gas_price


@dataclass(frozen=True)
class TraceCall:
    tx_hash: str
    call_type: CallType
    callee: str | None
    selector: bytes
    depth_order: int


@dataclass
class LabelSet:
    routers: set[str] = field(default_factory=set)
    aggregators: set[str] = field(default_factory=set)
    dex_pools: set[str] = field(default_factory=set)
    exclusion_labels: dict[str, str] = field(default_factory=dict)

    @property
    def intermediaries(self) -> set[str]:
        return self.routers | self.aggregators


@dataclass(frozen=True)
class OhlcBar:
    date: date
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal

    def __post_init__(self):
        if self.low <= 0:
            raise ValueError("low must be positive")
        if not (self.low <= min(self.open, self.close) and max(self.open, self.close) <= self.high):
            raise ValueError("bar violates low <= min(open, close) <= max(open, close) <= high")


@dataclass(frozen=True)
class ContractBytecode:
    address: str
    code: bytes

    @property
    def is_empty(self) -> bool:
        return len(self.code) == 0


# ---------------------------------------------------------------------------
# field parsing helpers


def utc_day(ts: int) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def normalize_address(value) -> str:
    if not isinstance(value, str):
        raise ValueError("address must be a string")
    s = value.strip().lower()
    if not s.startswith("0x"):
        s = "0x" + s
    if len(s) != 42 or not _HEX_RE.match(s):
        raise ValueError(f"not a 20-byte hex address: {value!r}")
    return s


def normalize_hash(value) -> str:
    if not isinstance(value, str):
        raise ValueError("hash must be a string")
    s = value.strip().lower()
    if not s.startswith("0x"):
        s = "0x" + s
    if len(s) != 66 or not _HEX_RE.match(s):
        raise ValueError(f"not a 32-byte hex id: {value!r}")
    return s


def parse_hex_bytes(value) -> bytes:
    if value is None:
        return b""
    if not isinstance(value, str) or not _HEX_RE.match(value.strip()):
        raise ValueError(f"not a hex string: {value!r}")
    s = value.strip()
    if s[:2] in ("0x", "0X"):
        s = s[2:]
    if len(s) % 2:
        raise ValueError("odd-length hex string")
    return bytes.fromhex(s)


def parse_uint(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(value, int):
        n = value
    elif isinstance(value, str) and value.strip().isdigit():
        n = int(value.strip())
    else:
        raise ValueError(f"not an unsigned decimal integer: {value!r}")
    if n < 0:
        raise ValueError("negative value")
    return n


def parse_timestamp(value) -> int:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return int(value)
    if not isinstance(value, str):
        raise ValueError(f"not a timestamp: {value!r}")
    s = value.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    s = s.replace(" UTC", "+00:00")
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _hex(b: bytes) -> str:
    return "0x" + b.hex()


def _read_jsonl(path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise IngestError(path, lineno, None, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise IngestError(path, lineno, None, "expected a JSON object")
            yield lineno, obj


class _Row:
    """Field accessor that turns parse failures into IngestError with location."""

    def __init__(self, path, lineno, obj):
        self.path, self.lineno, self.obj = path, lineno, obj

    def get(self, name, parser, required=True):
        if name not in self.obj or self.obj[name] in (None, ""):
            if required:
                raise IngestError(self.path, self.lineno, name, "missing field")
            return None
        try:
            return parser(self.obj[name])
        except (ValueError, TypeError, InvalidOperation) as exc:
            raise IngestError(self.path, self.lineno, name, str(exc)) from None

    def fail(self, name, msg):
        raise IngestError(self.path, self.lineno, name, msg)


def _parse_status(value) -> Status:
    s = str(value).strip().lower()
    if s in ("1", "true", "success"):
        return Status.SUCCESS
    if s in ("0", "false", "revert"):
        return Status.REVERT
    raise ValueError(f"status must be 0 or 1, got {value!r}")


# ---------------------------------------------------------------------------
# loaders


def load_transactions(path, chain) -> Iterator[TransactionRecord]:
    """Stream transactions in file order.

    Raises IngestError on the first malformed row, or on a duplicate hash
    (reporting both line numbers). Rows that carry a ``chain`` field must
    agree with ``chain``.
    """
    chain = Chain.parse(chain)
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(path):
        row = _Row(path, lineno, obj)
        tx_hash = row.get("hash", normalize_hash)
        if tx_hash in seen:
            row.fail("hash", f"duplicate hash {tx_hash} (first seen on line {seen[tx_hash]})")
        seen[tx_hash] = lineno
        row_chain = row.get("chain", Chain.parse, required=False)
        if row_chain is not None and row_chain != chain:
            row.fail("chain", f"row chain {row_chain.value} does not match {chain.value}")
        gas_used = row.get("gas_used", parse_uint)
        if gas_used == 0:
            row.fail("gas_used", "gas_used must be positive for an included transaction")
        yield TransactionRecord(
            hash=tx_hash,
            from_addr=row.get("from", normalize_address),
            to_addr=row.get("to", normalize_address, required=False),
            block_number=row.get("block_number", parse_uint),
            timestamp=row.get("block_time", parse_timestamp),
            gas_used=gas_used,
            gas_price=row.get("gas_price", parse_uint),
            calldata=row.get("calldata", parse_hex_bytes, required=False) or b"",
            status=row.get("status", _parse_status),
            chain=chain,
        )


def load_swaps(path) -> dict[str, frozenset[SwapEvent]]:
    groups: dict[str, set[SwapEvent]] = defaultdict(set)
    seen: dict[tuple[str, int], int] = {}
    for lineno, obj in _read_jsonl(path):
        row = _Row(path, lineno, obj)
        tx_hash = row.get("tx_hash", normalize_hash)
        idx = row.get("evt_index", parse_uint)
        key = (tx_hash, idx)
        if key in seen:
            row.fail("evt_index", f"duplicate evt_index {idx} for {tx_hash} (first on line {seen[key]})")
        seen[key] = lineno
        sold = row.get("token_sold", normalize_address)
        bought = row.get("token_bought", normalize_address)
        if sold == bought:
            row.fail("token_bought", "token_sold equals token_bought")
        amount_sold = row.get("amount_sold", parse_uint)
        amount_bought = row.get("amount_bought", parse_uint)
        if amount_sold == 0:
            row.fail("amount_sold", "zero amount")
        if amount_bought == 0:
            row.fail("amount_bought", "zero amount")
        groups[tx_hash].add(SwapEvent(tx_hash, sold, bought, amount_sold, amount_bought, idx))
    return {h: frozenset(evts) for h, evts in groups.items()}


def load_traces(path) -> dict[str, tuple[TraceCall, ...]]:
    groups: dict[str, list[TraceCall]] = defaultdict(list)
    seen: dict[tuple[str, int], int] = {}
    for lineno, obj in _read_jsonl(path):
        row = _Row(path, lineno, obj)
        tx_hash = row.get("tx_hash", normalize_hash)
        order = row.get("order", parse_uint)
        if (tx_hash, order) in seen:
            row.fail("order", f"duplicate order {order} for {tx_hash} (first on line {seen[tx_hash, order]})")
        seen[tx_hash, order] = lineno
        call_type = row.get("call_type", lambda v: CallType(str(v).strip().lower()))
        selector = row.get("input_selector", parse_hex_bytes, required=False) or b""
        if len(selector) > 4:
            row.fail("input_selector", "selector longer than 4 bytes")
        groups[tx_hash].append(
            TraceCall(tx_hash, call_type, row.get("to", normalize_address, required=False), selector, order)
        )
    return {h: tuple(sorted(calls, key=lambda c: c.depth_order)) for h, calls in groups.items()}


LABEL_KINDS = ("router", "aggregator", "pool", "exclude")


def load_labels(path) -> LabelSet:
    labels = LabelSet()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"address", "kind"} - set(reader.fieldnames or ())
        if missing:
            raise IngestError(path, 1, sorted(missing)[0], "missing column")
        for lineno, rec in enumerate(reader, start=2):
            row = _Row(path, lineno, rec)
            addr = row.get("address", normalize_address)
            kind = (rec.get("kind") or "").strip().lower()
            note = (rec.get("note") or "").strip()
            if kind == "router":
                labels.routers.add(addr)
            elif kind == "aggregator":
                labels.aggregators.add(addr)
            elif kind == "pool":
                labels.dex_pools.add(addr)
            elif kind == "exclude":
                labels.exclusion_labels[addr] = note or "excluded by label"
            else:
                row.fail("kind", f"unknown label kind {kind!r}")
    return labels


def load_ohlc(path) -> list[OhlcBar]:
    bars = []
    path = Path(path)
    seen: dict[date, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.DictReader(fh), start=2):
            row = _Row(path, lineno, rec)
            day = row.get("date", lambda v: date.fromisoformat(v.strip()[:10]))
            if day in seen:
                row.fail("date", f"duplicate date {day} (first on line {seen[day]})")
            seen[day] = lineno
            prices = {k: row.get(k, lambda v: Decimal(v.strip())) for k in ("open", "high", "low", "close")}
            try:
                bars.append(OhlcBar(day, **prices))
            except ValueError as exc:
                row.fail("high" if "high" in str(exc) else "low", str(exc))
    bars.sort(key=lambda b: b.date)
    return bars


def load_bytecode(path) -> list[ContractBytecode]:
    out = []
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(path):
        row = _Row(path, lineno, obj)
        addr = row.get("address", normalize_address)
        if addr in seen:
            row.fail("address", f"duplicate address (first on line {seen[addr]})")
        seen[addr] = lineno
        out.append(ContractBytecode(addr, row.get("code", parse_hex_bytes, required=False) or b""))
    return out


# ---------------------------------------------------------------------------
# writers (canonical form)


def _write_jsonl(fh: IO[str], objs: Iterable[dict]):
    for obj in objs:
        fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def dump_transactions(txs: Iterable[TransactionRecord], fh: IO[str]):
    _write_jsonl(
        fh,
        (
            {
                "hash": t.hash,
                "from": t.from_addr,
                "to": t.to_addr,
                "block_number": t.block_number,
                "block_time": format_timestamp(t.timestamp),
                "gas_used": str(t.gas_used),
                "gas_price": str(t.gas_price),
                "calldata": _hex(t.calldata),
                "status": 1 if t.status is Status.SUCCESS else 0,
                "chain": t.chain.value,
            }
            for t in txs
        ),
    )


def dump_swaps(swaps: dict[str, Iterable[SwapEvent]], fh: IO[str]):
    def rows():
        for h in sorted(swaps):
            for s in sorted(swaps[h], key=lambda s: s.evt_index):
                yield {
                    "tx_hash": s.tx_hash,
                    "evt_index": s.evt_index,
                    "token_sold": s.token_sold,
                    "token_bought": s.token_bought,
                    "amount_sold": str(s.amount_sold),
                    "amount_bought": str(s.amount_bought),
                }

    _write_jsonl(fh, rows())


def dump_traces(traces: dict[str, Iterable[TraceCall]], fh: IO[str]):
    def rows():
        for h in sorted(traces):
            for c in sorted(traces[h], key=lambda c: c.depth_order):
                yield {
                    "tx_hash": c.tx_hash,
                    "order": c.depth_order,
                    "call_type": c.call_type.value,
                    "to": c.callee,
                    "input_selector": _hex(c.selector),
                }

    _write_jsonl(fh, rows())


def dump_labels(labels: LabelSet, fh: IO[str]):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["address", "kind", "note"])
    for kind, addrs in (("router", labels.routers), ("aggregator", labels.aggregators), ("pool", labels.dex_pools)):
        for a in sorted(addrs):
            w.writerow([a, kind, ""])
    for a in sorted(labels.exclusion_labels):
        w.writerow([a, "exclude", labels.exclusion_labels[a]])


def dump_ohlc(bars: Iterable[OhlcBar], fh: IO[str]):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["date", "open", "high", "low", "close"])
    for b in bars:
        w.writerow([b.date.isoformat(), b.open, b.high, b.low, b.close])


def dump_bytecode(codes: Iterable[ContractBytecode], fh: IO[str]):
    _write_jsonl(fh, ({"address": c.address, "code": _hex(c.code)} for c in codes))
