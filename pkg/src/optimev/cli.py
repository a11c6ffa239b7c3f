"""Command-line entry point.

Subcommands ``detect``, ``validate``, ``classify``, ``metrics``,
``similarity`` and ``regress`` each run one stage for every configured chain,
reading earlier stages' artifacts from the output directory. ``pipeline``
runs all of them in order. ``fixture`` writes the synthetic test fixture.

Exit codes: 0 success, 1 stage failure, 2 missing input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from functools import cached_property
from pathlib import Path

from . import classifier, detector, ingest, metrics, similarity, stats, validator
from .config import ConfigError, PipelineConfig, load_config
from .ingest import Chain

log = logging.getLogger("optimev")

STAGES = ("detect", "validate", "classify", "metrics", "similarity", "regress")

CANDIDATES = "candidates.json"
DETECT_SUMMARY = "detect_summary.json"
REPORT = "validation_report.csv"
CLASSIFIED = "classified.jsonl"
METRICS_DIR = "metrics"
MATRIX = "similarity_matrix.csv"
CLUSTERS = "clone_clusters.json"
REGRESSION = "regression_results.json"
FRAME = "regression_frame.csv"


class MissingInput(Exception):
    def __init__(self, path):
        self.path = Path(path)
        super().__init__(f"missing input: {self.path}")


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


def _need(path: Path) -> Path:
    if not path.is_file():
        raise MissingInput(path)
    return path


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class ChainRun:
    """Lazily loaded inputs and prior artifacts for one chain."""

    def __init__(self, cfg: PipelineConfig, chain: Chain):
        self.cfg = cfg
        self.chain = chain
        self.out = cfg.chain_dir(chain)

    def path(self, kind: str) -> Path:
        return _need(self.cfg.input_path(kind, self.chain))

    def artifact(self, name: str) -> Path:
        return _need(self.out / name)

    @cached_property
    def txs(self) -> list[ingest.TransactionRecord]:
        return list(ingest.load_transactions(self.path("transactions"), self.chain))

    @cached_property
    def swaps(self):
        return ingest.load_swaps(self.path("swaps"))

    @cached_property
    def traces(self):
        return ingest.load_traces(self.path("traces"))

    @cached_property
    def labels(self) -> ingest.LabelSet:
        return ingest.load_labels(self.path("labels"))

    @cached_property
    def bots(self) -> set[str]:
        with self.artifact(REPORT).open() as fh:
            reports, _ = validator.read_report(fh)
        return validator.bots_from_reports(reports)

    @cached_property
    def classified(self) -> list[classifier.ClassifiedTx]:
        with self.artifact(CLASSIFIED).open() as fh:
            return list(classifier.read_classified(fh))

    # -- stages -----------------------------------------------------------

    def detect(self):
        counts: list = []
        cands = detector.detect_candidates(
            self.txs, self.swaps, self.labels,
            epsilon=self.cfg.dust_epsilon, evidence_limit=self.cfg.evidence_limit, counts_out=counts,
        )
        _dump_json(detector.candidates_to_json(cands), self.out / CANDIDATES)
        c = counts[0]
        _dump_json(
            {
                "chain": self.chain.value,
                "swap_transactions": c.raw,
                "after_router_aggregator_filter": c.after_router_filter,
                "after_cycle_filter": c.after_cycle_filter,
                "after_profit_filter": c.after_profit_filter,
                "candidates": len(cands),
            },
            self.out / DETECT_SUMMARY,
        )

    def validate(self):
        with self.artifact(CANDIDATES).open() as fh:
            cands = detector.candidates_from_json(json.load(fh))
        _, reports, coverage = validator.validate(
            cands, self.txs, self.traces, self.swaps, self.labels.dex_pools,
            self.labels.exclusion_labels, self.cfg.thresholds,
        )
        with (self.out / REPORT).open("w", newline="") as fh:
            validator.write_report(reports, coverage, fh)
        self.__dict__.pop("bots", None)

    def classify(self):
        st = classifier.ClassifyStats()
        rows = classifier.classify_all(self.txs, self.swaps, self.traces, self.labels.dex_pools, self.bots, st)
        with (self.out / CLASSIFIED).open("w") as fh:
            classifier.write_classified(rows, fh)
        self.__dict__["classified"] = rows

    def metrics(self):
        d = self.out / METRICS_DIR
        d.mkdir(exist_ok=True)
        aggs = metrics.aggregate_daily(self.classified, self.txs, workers=self.cfg.worker_count)
        metrics.write_daily_gas(aggs, d / "daily_gas.csv")
        metrics.write_daily_shares(aggs, d / "daily_shares.csv")
        for note in metrics.write_normalized_growth(aggs, self.cfg.event_date, d / "normalized_growth.csv"):
            log.warning("normalized growth skipped %s", note)
        metrics.write_gas_price_stats(aggs, d / "gas_price_stats.csv")
        metrics.write_fee_gas_share(aggs, d / "fee_gas_share.csv")
        try:
            dist = metrics.outcome_distribution(self.classified)
        except metrics.MetricsError as exc:
            log.warning("%s: %s", self.chain.value, exc)
            dist = None
        metrics.write_outcome_distribution(self.chain, dist, d / "outcome_distribution.csv")
        metrics.write_bot_stats(metrics.bot_stats_table(self.bots, self.txs, self.swaps), d / "bot_stats.csv")
        metrics.write_revert_share(metrics.revert_share(self.classified, self.txs), d / "revert_share.csv")
        metrics.write_single_swap(metrics.single_swap_screen(self.bots, self.txs, self.swaps), d / "single_swap_dominance.csv")

    def similarity(self):
        codes = ingest.load_bytecode(self.path("bytecode"))
        codes.sort(key=lambda c: c.address)
        with (self.out / CLUSTERS).open("w") as fh:
            similarity.write_clusters(similarity.clone_clusters(codes), fh)
        with (self.out / MATRIX).open("w", newline="") as fh:
            if codes:
                m = similarity.similarity_matrix(codes, self.cfg.ngram_n, self.cfg.worker_count)
                similarity.write_matrix([c.address for c in codes], m, fh)
            else:
                fh.write("address\n")

    def daily_counts(self) -> dict:
        by_hash = {t.hash: t for t in self.txs}
        aggs = self.labels.aggregators
        counts: dict = {}
        for c in self.classified:
            t = by_hash[c.hash]
            dc = counts.setdefault(t.day, stats.DailyCounts(0, 0, 0, 0))
            trade = c.involvement is classifier.Involvement.TRADE
            if c.purpose is classifier.Purpose.CYCLIC_ARB:
                dc.cyclic_arb_tx += 1
                dc.cyclic_arb_tx_w_trade += trade
            elif trade:
                dc.retail_txs += 1
                dc.retail_aggregator_trades += t.to_addr in aggs
        return counts

    def regress(self):
        ohlc = ingest.load_ohlc(self.path("ohlc"))
        counts = self.daily_counts()
        ohlc = [b for b in ohlc if b.date in counts]
        frame = stats.build_frame(counts, ohlc, allow_gaps=self.cfg.allow_date_gaps)
        with (self.out / FRAME).open("w", newline="") as fh:
            cols = list(stats.DEPENDENTS) + list(stats.REGRESSORS)
            fh.write(",".join(["date"] + cols) + "\n")
            for i, d in enumerate(frame.dates):
                fh.write(",".join([d.isoformat()] + [repr(float(frame.columns[c][i])) for c in cols]) + "\n")
        models = {}
        for dep in stats.DEPENDENTS:
            try:
                models[dep] = stats.result_to_json(stats.fit_frame(frame, dep))
            except stats.StatsError as exc:
                log.warning("%s %s not fitted: %s", self.chain.value, dep, exc)
                models[dep] = {"skipped": str(exc), "obs": len(frame)}
        _dump_json({"chain": self.chain.value, "models": models}, self.out / REGRESSION)


def run(stage: str, cfg: PipelineConfig) -> None:
    stages = STAGES if stage == "pipeline" else (stage,)
    for chain in cfg.chains:
        cr = ChainRun(cfg, chain)
        cr.out.mkdir(parents=True, exist_ok=True)
        for s in stages:
            log.info("%s: %s", chain.value, s)
            try:
                getattr(cr, s)()
            except MissingInput:
                raise
            except (ValueError, KeyError, OSError) as exc:
                raise StageError(s, f"{chain.value}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optimev", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES + ("pipeline",):
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "pipeline" else "run all stages")
        sp.add_argument("-c", "--config", required=True, help="INI config file")
        sp.add_argument("--chain", action="append", help="restrict to chain(s); repeatable")
        sp.add_argument("-o", "--output-dir", help="override output directory")
        sp.add_argument("-j", "--workers", type=int, help="worker processes (0 = all cores)")
    fx = sub.add_parser("fixture", help="write the synthetic fixture and a config for it")
    fx.add_argument("out_dir")
    fx.add_argument("--days", type=int, default=3)
    fx.add_argument("--seed", type=int, default=7)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "fixture":
        from .fixture import write_fixture

        cfg_path = write_fixture(args.out_dir, days=args.days, seed=args.seed)
        print(cfg_path)
        return 0
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(
            chains=tuple(Chain.parse(c) for c in args.chain) if args.chain else None,
            output_dir=Path(args.output_dir) if args.output_dir else None,
            workers=args.workers,
        )
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: stage config failed: {exc}", file=sys.stderr)
        return 1
    try:
        run(args.command, cfg)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
