"""Population statistics for bias records.

Student-t probabilities come from the regularized incomplete beta function,
evaluated with a modified-Lentz continued fraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError

_BETA_TOL = 1e-12
_BETA_MAX_ITER = 300
_TINY = 1e-300
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def mean_std(xs):
    """Mean and sample standard deviation (n - 1 denominator)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size < 2:
        raise ContractError("mean_std needs at least two values")
    return float(xs.mean()), float(xs.std(ddof=1))


def pearson(xs, ys):
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ContractError("pearson needs two equal-length sequences")
    if xs.size < 3:
        raise ContractError("pearson needs at least three points")
    dx, dy = xs - xs.mean(), ys - ys.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ContractError("pearson is undefined for a constant sequence")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def _betacf(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
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
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ContractError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ContractError("betainc needs x in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t, df):
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ContractError("student_t_cdf needs df >= 1")
    if t == 0:
        return 0.5
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class CorrTestResult:
    rho: float
    t: float
    df: int
    p_one_tail: float


def corr_t_test(rho, n):
    """t-test of a Pearson correlation; the one-tailed p is taken in the direction of rho's sign."""
    if n < 3:
        raise ContractError("corr_t_test needs n >= 3")
    if abs(rho) >= 1.0:
        raise ContractError("corr_t_test is degenerate for |rho| = 1")
    df = n - 2
    t = rho * math.sqrt(df) / math.sqrt(1.0 - rho * rho)
    p = 1.0 - student_t_cdf(t, df) if rho >= 0 else student_t_cdf(t, df)
    return CorrTestResult(rho, t, df, p)


@dataclass(frozen=True)
class PairedTestResult:
    t: float
    df: int
    p_two_tail: float


def paired_t_test(xs, ys):
    """Two-tailed paired t-test on ``xs - ys``."""
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ContractError("paired_t_test needs two equal-length sequences of length >= 2")
    d = xs - ys
    n = d.size
    m, s = float(d.mean()), float(d.std(ddof=1))
    if s == 0.0:
        if m == 0.0:
            return PairedTestResult(0.0, n - 1, 1.0)
        raise ContractError("paired_t_test is degenerate: constant non-zero differences")
    t = m / (s / math.sqrt(n))
    p = 2.0 * student_t_cdf(-abs(t), n - 1)
    return PairedTestResult(t, n - 1, min(1.0, p))


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self):
        return float(_trapezoid(self.density, self.grid))


def silverman_bandwidth(values, floor=0.01):
    values = np.asarray(values, dtype=np.float64)
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return max(1.06 * sigma * values.size ** (-0.2), floor)


def kde(values, grid, bandwidth=None):
    """Gaussian kernel density estimate of ``values`` evaluated on ``grid``."""
    values = np.asarray(values, dtype=np.float64).ravel()
    grid = np.asarray(grid, dtype=np.float64)
    if values.size == 0:
        raise ContractError("kde needs at least one value")
    if grid.ndim != 1 or (np.diff(grid) < 0).any():
        raise ContractError("kde grid must be a sorted 1-D array")
    h = silverman_bandwidth(values) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ContractError("bandwidth must be positive")
    z = (grid[:, None] - values[None, :]) / h
    density = np.exp(-0.5 * z * z).mean(axis=1) / (h * math.sqrt(2.0 * math.pi))
    return DensityEstimate(grid, density, h)
