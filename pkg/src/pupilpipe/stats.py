"""Feature-label correlation analysis.

Pearson r of every feature against the 0/1 episode label, two-tailed
Student-t p-values, per-class summaries, and the top-significant-feature
rule (p below a cutoff and at least a weak |r|).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .features import FEATURE_NAMES, LabeledDay, feature_matrix

P_MAX = 0.05
R_MIN = 0.20

_CF_TOL = 1e-12
_CF_MAX_ITER = 10_000
_TINY = 1e-300


class ConstantInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class SingleClass(ValueError):
    """Only one label value is present where both are required."""


class EmptySelection(ValueError):
    pass


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.shape} vs {y.shape}")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInput("zero variance series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_tailed(t: float, df: float) -> float:
    """P(|T| > |t|) for Student's t with ``df`` degrees of freedom."""
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def p_value_two_tailed(r: float, n: int) -> float:
    """Two-tailed p-value of a Pearson r from ``n`` pairs.

    Uses t = r sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom. Returns 0 for
    |r| = 1.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return min(1.0, max(0.0, t_sf_two_tailed(t, df)))


@dataclass(frozen=True)
class FeatureCorrelation:
    feature_name: str
    r: float
    p: float
    depressive_mean: float
    depressive_sd: float
    nondepressive_mean: float
    nondepressive_sd: float
    constant: bool = False


def correlate_columns(X: np.ndarray, y: np.ndarray, names: Sequence[str]) -> list[FeatureCorrelation]:
    """Correlation rows for the columns of ``X`` against boolean ``y``, sorted by |r|."""
    y = np.asarray(y, dtype=bool)
    n = len(y)
    if n < 3:
        raise ValueError("need at least 3 rows")
    if y.all() or not y.any():
        raise SingleClass("correlation table needs both classes")
    pos, neg = X[y], X[~y]
    rows = []
    for j, name in enumerate(names):
        col = X[:, j]
        try:
            r = pearson_r(col, y.astype(float))
            p = p_value_two_tailed(r, n)
            constant = False
        except ConstantInput:
            r, p, constant = 0.0, 1.0, True
        rows.append(FeatureCorrelation(
            name, r, p,
            float(pos[:, j].mean()), float(pos[:, j].std(ddof=1)) if len(pos) > 1 else 0.0,
            float(neg[:, j].mean()), float(neg[:, j].std(ddof=1)) if len(neg) > 1 else 0.0,
            constant,
        ))
    rows.sort(key=lambda c: (-abs(c.r), c.feature_name))
    return rows


def correlation_table(days: Sequence[LabeledDay], names: Sequence[str] = FEATURE_NAMES) -> list[FeatureCorrelation]:
    X, y, _ = feature_matrix(days, names)
    return correlate_columns(X, y, names)


def select_tsf(table: Iterable[FeatureCorrelation], p_max: float = P_MAX, r_min: float = R_MIN) -> list[str]:
    """Names with ``p < p_max`` and ``|r| >= r_min``, by descending |r|.

    Raises
    ------
    EmptySelection
        If no feature passes.
    """
    keep = [c for c in table if c.p < p_max and abs(c.r) >= r_min and not c.constant]
    keep.sort(key=lambda c: (-abs(c.r), c.feature_name))
    if not keep:
        raise EmptySelection(f"no feature with p < {p_max} and |r| >= {r_min}")
    return [c.feature_name for c in keep]


def write_correlation_csv(table: Iterable[FeatureCorrelation], fh: IO[str], paper_format: bool = False) -> None:
    fmt = "{:.2f}" if paper_format else "{:.6f}"
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["feature", "p_value", "r_value", "depressive_mean", "depressive_sd",
                "nondepressive_mean", "nondepressive_sd"])
    for c in table:
        w.writerow([c.feature_name, *(fmt.format(v) for v in (
            c.p, c.r, c.depressive_mean, c.depressive_sd, c.nondepressive_mean, c.nondepressive_sd))])
