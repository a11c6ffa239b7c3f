"""Daily regression frame and OLS with heteroskedasticity-robust errors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping, Sequence

import numpy as np

from .ingest import OhlcBar

log = logging.getLogger(__name__)

REGRESSORS = ("d_price", "d_volatility", "d_retail_txs", "d_retail_agg_frac")
DEPENDENTS = ("d_cyclic_arb_tx", "d_cyclic_arb_tx_w_trade")
_GK_C = 2 * math.log(2) - 1


class StatsError(ValueError):
    pass


def garman_klass_radicand(bar: OhlcBar) -> float:
    hl = math.log(bar.high) - math.log(bar.low)
    co = math.log(bar.close) - math.log(bar.open)
    return 0.5 * hl * hl - _GK_C * co * co


def garman_klass(bar: OhlcBar) -> float:
    return math.sqrt(garman_klass_radicand(bar))


def first_difference(series: Mapping[date, float], allow_gaps: bool = False) -> dict[date, float]:
    """x[t] - x[t-1] keyed by t. Interior calendar gaps raise unless ``allow_gaps``."""
    days = sorted(series)
    out = {}
    skipped = 0
    for prev, cur in zip(days, days[1:]):
        if cur - prev != timedelta(days=1):
            if not allow_gaps:
                raise StatsError(f"gap in series between {prev} and {cur}")
            skipped += 1
            continue
        out[cur] = series[cur] - series[prev]
    if skipped:
        log.warning("first_difference skipped %d gaps", skipped)
    return out


@dataclass
class DailyCounts:
    cyclic_arb_tx: int
    cyclic_arb_tx_w_trade: int
    retail_txs: int
    retail_aggregator_trades: int


@dataclass
class RegressionFrame:
    dates: list[date]
    columns: dict[str, np.ndarray]

    def __len__(self):
        return len(self.dates)

    def design(self) -> np.ndarray:
        return np.column_stack([np.ones(len(self.dates))] + [self.columns[c] for c in REGRESSORS])


def build_frame(counts: Mapping[date, DailyCounts], ohlc: Sequence[OhlcBar], allow_gaps: bool = False) -> RegressionFrame:
    bars = {b.date: b for b in ohlc}
    if set(counts) != set(bars):
        missing = sorted(set(counts) ^ set(bars))
        raise StatsError(f"daily counts and OHLC cover different dates (e.g. {missing[0]})")
    raw: dict[str, dict[date, float]] = {k: {} for k in ("cyclic_arb_tx", "cyclic_arb_tx_w_trade", "price", "volatility", "retail_txs", "retail_agg_frac")}
    for d, c in counts.items():
        if c.retail_txs == 0:
            raise StatsError(f"no retail trades on {d}; aggregator fraction undefined")
        raw["cyclic_arb_tx"][d] = c.cyclic_arb_tx
        raw["cyclic_arb_tx_w_trade"][d] = c.cyclic_arb_tx_w_trade
        raw["retail_txs"][d] = c.retail_txs
        raw["retail_agg_frac"][d] = c.retail_aggregator_trades / c.retail_txs
        raw["price"][d] = float(bars[d].close)
        raw["volatility"][d] = garman_klass(bars[d])
    diffs = {k: first_difference(v, allow_gaps) for k, v in raw.items()}
    dates = sorted(diffs["price"])
    cols = {"d_" + k: np.array([diffs[k][d] for d in dates], dtype=float) for k in raw}
    return RegressionFrame(dates, cols)


@dataclass
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    residuals: np.ndarray
    r2: float
    adj_r2: float
    f_stat: float  # robust Wald F on all slopes
    f_stat_classic: float
    nobs: int

    @property
    def t_values(self) -> np.ndarray:
        # a zero standard error gives an infinite (or undefined) t-value
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def p_values(self) -> np.ndarray:
        return np.array([math.erfc(abs(t) / math.sqrt(2)) if not math.isnan(t) else math.nan for t in self.t_values])

    def stars(self) -> list[str]:
        return ["***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else "" for p in self.p_values]


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    kept: list[int] = []
    bad = []
    for j in range(X.shape[1]):
        if np.linalg.matrix_rank(X[:, kept + [j]]) > len(kept):
            kept.append(j)
        else:
            bad.append(names[j])
    return bad


def ols_fit(y, X, names: Sequence[str] | None = None) -> RegressionResult:
    """Least squares with HC1 standard errors. ``X`` must include the intercept column first."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    names = tuple(names) if names else ("const",) + tuple(f"x{i}" for i in range(1, k))
    if n < k + 1:
        raise StatsError(f"need at least {k + 1} observations, got {n}")
    if np.linalg.matrix_rank(X) < k:
        raise StatsError(f"design matrix is rank deficient; collinear columns: {', '.join(_collinear_columns(X, names))}")

    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    r_inv = np.linalg.inv(r)
    xtx_inv = r_inv @ r_inv.T
    meat = (X * resid[:, None] ** 2).T @ X
    cov = xtx_inv @ meat @ xtx_inv * (n / (n - k))
    se = np.sqrt(np.diag(cov))

    ssr = float(resid @ resid)
    centered = y - y.mean()
    sst = float(centered @ centered)
    r2 = 1.0 - ssr / sst if sst > 0 else (1.0 if ssr == 0 else 0.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)

    df_model = k - 1
    if r2 < 1.0:
        f_classic = (r2 / df_model) / ((1.0 - r2) / (n - k))
    else:
        f_classic = math.inf
    slopes = beta[1:]
    vs = cov[1:, 1:]
    try:
        f_robust = float(slopes @ np.linalg.solve(vs, slopes)) / df_model
    except np.linalg.LinAlgError:
        f_robust = math.inf
    return RegressionResult(names, beta, se, resid, r2, adj, f_robust, f_classic, n)


def fit_frame(frame: RegressionFrame, dependent: str) -> RegressionResult:
    return ols_fit(frame.columns[dependent], frame.design(), ("const",) + REGRESSORS)


def result_to_json(res: RegressionResult) -> dict:
    stars = res.stars()
    return {
        "obs": res.nobs,
        "adj_r2": round(res.adj_r2, 10),
        "r2": round(res.r2, 10),
        "f_stat": round(res.f_stat, 10) if math.isfinite(res.f_stat) else None,
        "f_stat_classic": round(res.f_stat_classic, 10) if math.isfinite(res.f_stat_classic) else None,
        "coefficients": {
            name: {"coef": round(float(b), 10), "robust_se": round(float(s), 10), "stars": st}
            for name, b, s, st in zip(res.names, res.coef, res.se, stars)
        },
    }
