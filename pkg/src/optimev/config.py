"""Pipeline configuration (INI file).

Example::

    [pipeline]
    chains = base, optimism
    output_dir = out
    event_date = 2024-03-13
    workers = 0

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

Relative paths resolve against the config file's directory. ``{chain}`` in
an input path is replaced by the chain name.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

from .ingest import Chain
from .validator import Thresholds

INPUT_KINDS = ("transactions", "swaps", "traces", "labels", "bytecode", "ohlc")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    chains: tuple[Chain, ...] = (Chain.BASE,)
    inputs: dict[str, str] = field(default_factory=dict)
    output_dir: Path = Path("out")
    event_date: date = date(2024, 3, 13)
    workers: int = 0
    thresholds: Thresholds = Thresholds()
    dust_epsilon: int = 0
    ngram_n: int = 5
    evidence_limit: int = 100
    allow_date_gaps: bool = False

    def __post_init__(self):
        t = self.thresholds
        if not 0.0 <= t.dex_interaction_min <= 1.0:
            raise ConfigError("dex_interaction_min must lie in [0, 1]")
        if not 0.0 < t.gas_coverage <= 1.0:
            raise ConfigError("gas_coverage must lie in (0, 1]")
        if t.eoa_max < 0 or t.human_burst_max < 1 or t.human_burst_window_s < 1 or t.human_median_gap_s < 0:
            raise ConfigError("caller-profile thresholds out of range")
        if self.dust_epsilon < 0:
            raise ConfigError("dust_epsilon must be non-negative")
        if self.ngram_n < 1:
            raise ConfigError("ngram_n must be at least 1")
        if self.evidence_limit < 1:
            raise ConfigError("evidence_limit must be at least 1")
        if not self.chains:
            raise ConfigError("no chains configured")

    def input_path(self, kind: str, chain: Chain) -> Path:
        if kind not in self.inputs:
            raise ConfigError(f"no input path configured for {kind}")
        return Path(self.inputs[kind].replace("{chain}", chain.value))

    def chain_dir(self, chain: Chain) -> Path:
        return self.output_dir / chain.value

    @property
    def worker_count(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def load_config(path) -> PipelineConfig:
    path = Path(path)
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    base = path.parent

    def resolve(p: str) -> str:
        q = Path(p.strip())
        return str(q if q.is_absolute() else base / q)

    try:
        pipe = cp["pipeline"] if cp.has_section("pipeline") else {}
        chains = tuple(Chain.parse(c) for c in pipe.get("chains", "base").split(",") if c.strip())
        inputs = {k: resolve(v) for k, v in (cp["inputs"].items() if cp.has_section("inputs") else [])}
        unknown = set(inputs) - set(INPUT_KINDS)
        if unknown:
            raise ConfigError(f"unknown input kind(s): {', '.join(sorted(unknown))}")
        th = cp["thresholds"] if cp.has_section("thresholds") else {}
        thresholds = Thresholds(
            dex_interaction_min=float(th.get("dex_interaction_min", 0.6)),
            eoa_max=int(th.get("eoa_max", 3)),
            human_median_gap_s=float(th.get("human_median_gap_s", 30)),
            human_burst_window_s=int(th.get("human_burst_window_s", 60)),
            human_burst_max=int(th.get("human_burst_max", 10)),
            gas_coverage=float(th.get("gas_coverage", 0.8)),
        )
        return PipelineConfig(
            chains=chains,
            inputs=inputs,
            output_dir=Path(resolve(pipe.get("output_dir", "out"))),
            event_date=date.fromisoformat(pipe.get("event_date", "2024-03-13").strip()),
            workers=int(pipe.get("workers", 0)),
            thresholds=thresholds,
            dust_epsilon=int(th.get("dust_epsilon", 0)),
            ngram_n=int(th.get("ngram_n", 5)),
            evidence_limit=int(th.get("evidence_limit", 100)),
            allow_date_gaps=_bool(th.get("allow_date_gaps", "false")),
        )
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
