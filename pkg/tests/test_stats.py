import math
import random
from datetime import date, timedelta
from decimal import Decimal
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from optimev.ingest import OhlcBar
from optimev.stats import (
    REGRESSORS,
    DailyCounts,
    StatsError,
    build_frame,
    first_difference,
    garman_klass,
    garman_klass_radicand,
    ols_fit,
    result_to_json,
)

D0 = date(2024, 3, 12)


def _bar(o, h, l, c, d=D0):
    return OhlcBar(d, Decimal(o), Decimal(h), Decimal(l), Decimal(c))


def gk_oracle(o, h, l, c):
    mpmath.mp.dps = 50
    o, h, l, c = map(mpmath.mpf, (o, h, l, c))
    return mpmath.sqrt(0.5 * (mpmath.log(h) - mpmath.log(l)) ** 2 - (2 * mpmath.log(2) - 1) * (mpmath.log(c) - mpmath.log(o)) ** 2)


def test_gk_flat_bar():
    assert garman_klass(_bar(100, 100, 100, 100)) == 0.0


@pytest.mark.parametrize("o,h,l,c,approx", [(100, 110, 100, 110, 0.032138), (105, 110, 100, 105, 0.067400)])
def test_gk_point_values(o, h, l, c, approx):
    got = garman_klass(_bar(o, h, l, c))
    want = float(gk_oracle(o, h, l, c))
    assert abs(got - want) <= 1e-9 * want
    # the quoted approximations are only good to about 5 decimals
    assert abs(got - approx) < 1e-5


def test_gk_second_term_vanishes():
    assert garman_klass(_bar(105, 110, 100, 105)) == pytest.approx(math.sqrt(0.5) * math.log(1.1), rel=1e-12)


def test_gk_radicand_nonnegative_random():
    rng = random.Random(0)
    for _ in range(2000):
        lo = rng.uniform(1, 1000)
        hi = lo * rng.uniform(1, 2)
        o, c = rng.uniform(lo, hi), rng.uniform(lo, hi)
        assert garman_klass_radicand(_bar(o, hi, lo, c)) >= 0


def _series(values):
    return {D0 + timedelta(days=i): v for i, v in enumerate(values)}


def test_first_difference():
    assert list(first_difference(_series([3, 5, 4])).values()) == [2, -1]
    assert list(first_difference(_series([7, 7, 7])).values()) == [0, 0]
    assert first_difference(_series([7])) == {}


def test_first_difference_gap():
    s = {D0: 1, D0 + timedelta(days=2): 3}
    with pytest.raises(StatsError, match=str(D0)):
        first_difference(s)
    assert first_difference(s, allow_gaps=True) == {}


def test_build_frame_hand_differences():
    counts = {
        D0: DailyCounts(100, 60, 200, 50),
        D0 + timedelta(days=1): DailyCounts(130, 70, 250, 50),
        D0 + timedelta(days=2): DailyCounts(110, 90, 200, 100),
    }
    bars = [
        _bar(100, 110, 100, 110, D0),
        _bar(110, 120, 105, 115, D0 + timedelta(days=1)),
        _bar(115, 115, 100, 100, D0 + timedelta(days=2)),
    ]
    f = build_frame(counts, bars)
    assert f.dates == [D0 + timedelta(days=1), D0 + timedelta(days=2)]
    assert f.columns["d_cyclic_arb_tx"].tolist() == [30, -20]
    assert f.columns["d_cyclic_arb_tx_w_trade"].tolist() == [10, 20]
    assert f.columns["d_retail_txs"].tolist() == [50, -50]
    assert f.columns["d_retail_agg_frac"].tolist() == pytest.approx([0.2 - 0.25, 0.5 - 0.2])
    assert f.columns["d_price"].tolist() == [5, -15]
    gk = [float(gk_oracle(*args)) for args in [(100, 110, 100, 110), (110, 120, 105, 115), (115, 115, 100, 100)]]
    assert f.columns["d_volatility"].tolist() == pytest.approx([gk[1] - gk[0], gk[2] - gk[1]], rel=1e-12)
    assert f.design().shape == (2, 1 + len(REGRESSORS))


def test_build_frame_identical_days_zero_row():
    c = DailyCounts(5, 3, 200, 50)
    f = build_frame({D0: c, D0 + timedelta(days=1): c}, [_bar(1, 2, 1, 2, D0), _bar(1, 2, 1, 2, D0 + timedelta(days=1))])
    assert all(f.columns[k].tolist() == [0.0] for k in f.columns)


def test_build_frame_zero_retail():
    with pytest.raises(StatsError, match="retail"):
        build_frame({D0: DailyCounts(1, 1, 0, 0)}, [_bar(1, 1, 1, 1)])


def test_retail_agg_frac():
    c0, c1 = DailyCounts(0, 0, 200, 50), DailyCounts(0, 0, 200, 100)
    f = build_frame({D0: c0, D0 + timedelta(days=1): c1}, [_bar(1, 1, 1, 1, D0), _bar(1, 1, 1, 1, D0 + timedelta(days=1))])
    assert f.columns["d_retail_agg_frac"].tolist() == [0.25]


# -- OLS ---------------------------------------------------------------------


def normal_equations_oracle(y, X):
    """Solve X'X b = X'y by Gauss-Jordan elimination in exact rationals."""
    n, k = len(X), len(X[0])
    Xf = [[Fraction(v) for v in row] for row in X]
    yf = [Fraction(v) for v in y]
    A = [[sum(Xf[r][i] * Xf[r][j] for r in range(n)) for j in range(k)] + [sum(Xf[r][i] * yf[r] for r in range(n))] for i in range(k)]
    for col in range(k):
        piv = next(r for r in range(col, k) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [v / p for v in A[col]]
        for r in range(k):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return [A[i][k] for i in range(k)]


def random_instance(rng, n, k=5):
    X = np.column_stack([np.ones(n)] + [rng.normal(0, 1 + j, n) for j in range(k - 1)])
    y = X @ rng.normal(0, 3, k) + rng.normal(0, 1, n)
    return y, X


@pytest.mark.parametrize("seed", range(5))
def test_ols_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    y, X = random_instance(rng, 20)
    want = normal_equations_oracle(y.tolist(), X.tolist())
    got = ols_fit(y, X).coef
    for g, w in zip(got, want):
        assert abs(g - float(w)) <= 1e-9 * max(1.0, abs(float(w)))


def test_hc1_against_exact_sandwich():
    rng = np.random.default_rng(11)
    y, X = random_instance(rng, 25, 3)
    res = ols_fit(y, X)
    n, k = X.shape
    Xf = [[Fraction(v) for v in row] for row in X.tolist()]
    beta = normal_equations_oracle(y.tolist(), X.tolist())
    e = [Fraction(yv) - sum(b * x for b, x in zip(beta, row)) for yv, row in zip(y.tolist(), Xf)]
    xtx = np.array([[float(sum(Xf[r][i] * Xf[r][j] for r in range(n))) for j in range(k)] for i in range(k)])
    meat = np.array([[float(sum(Xf[r][i] * Xf[r][j] * e[r] ** 2 for r in range(n))) for j in range(k)] for i in range(k)])
    inv = np.linalg.inv(xtx)
    cov = inv @ meat @ inv * n / (n - k)
    assert np.allclose(res.se, np.sqrt(np.diag(cov)), rtol=1e-9, atol=0)


def test_perfect_fit():
    x = np.arange(10, dtype=float)
    X = np.column_stack([np.ones(10), x])
    res = ols_fit(1 + 2 * x, X)
    assert res.coef == pytest.approx([1, 2], abs=1e-12)
    assert abs(res.r2 - 1.0) <= 1e-12
    assert np.max(np.abs(res.residuals)) <= 1e-12


def test_orthogonal_target():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
    y = rng.normal(size=50)
    # project y off the column space so slopes are zero
    q, _ = np.linalg.qr(X)
    y = y - q @ (q.T @ y)
    res = ols_fit(y, X)
    assert np.max(np.abs(res.coef[1:])) <= 1e-9


def test_residual_orthogonality_and_scale():
    rng = np.random.default_rng(5)
    y, X = random_instance(rng, 200)
    res = ols_fit(y, X)
    assert np.max(np.abs(X.T @ res.residuals)) <= 1e-9 * np.linalg.norm(y)
    scaled = ols_fit(3 * y, X)
    assert np.allclose(scaled.coef, 3 * res.coef, rtol=1e-10)
    assert scaled.r2 == pytest.approx(res.r2, rel=1e-12)


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(1)
    a = rng.normal(size=30)
    X = np.column_stack([np.ones(30), a, 2 * a, rng.normal(size=30)])
    with pytest.raises(StatsError, match="x2"):
        ols_fit(rng.normal(size=30), X)


def test_too_few_rows():
    with pytest.raises(StatsError, match="observations"):
        ols_fit([1.0, 2.0], np.ones((2, 2)))


def test_fit_statistics():
    rng = np.random.default_rng(8)
    y, X = random_instance(rng, 300)
    res = ols_fit(y, X)
    n, k = X.shape
    assert res.adj_r2 == pytest.approx(1 - (1 - res.r2) * (n - 1) / (n - k), rel=1e-12)
    ssr = res.residuals @ res.residuals
    ssm = np.sum((X @ res.coef - y.mean()) ** 2)
    assert res.f_stat_classic == pytest.approx((ssm / (k - 1)) / (ssr / (n - k)), rel=1e-9)
    out = result_to_json(res)
    assert out["obs"] == 300 and set(out["coefficients"]) == set(res.names)


def test_stars():
    rng = np.random.default_rng(2)
    n = 400
    X = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    y = 5 * X[:, 1] + rng.normal(size=n)
    res = ols_fit(y, X)
    assert res.stars()[1] == "***"
    assert res.p_values[1] == pytest.approx(math.erfc(abs(res.t_values[1]) / math.sqrt(2)))
