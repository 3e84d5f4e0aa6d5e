"""Nonparametric comparison of campaign samples.

Mann-Whitney U for significance, Vargha-Delaney A12 for effect size and
Shapiro-Wilk (Royston's AS R94 approximation) for normality.
All tests are two-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist
from typing import Iterable, Mapping, Sequence

EXACT = "exact"
NORMAL = "normal-approximation"
EXACT_MAX_N = 16

_STD = NormalDist()


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str

    __test__ = False  # not a pytest class


def _check(sample: Sequence[float], name: str = "sample") -> list[float]:
    values = [float(v) for v in sample]
    if not values:
        raise StatsError(f"{name} is empty")
    if not all(math.isfinite(v) for v in values):
        raise StatsError(f"{name} has non-finite values")
    return values


def satisfaction(interests_sent: int, data_received: int) -> float:
    """Fraction of requests answered; undefined (error) when nothing was sent."""
    if interests_sent <= 0:
        raise StatsError("satisfaction is undefined without interests sent")
    if not 0 <= data_received <= interests_sent:
        raise StatsError(f"data_received {data_received} outside [0, {interests_sent}]")
    return data_received / interests_sent


def midranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """1-based ranks with ties sharing their mean rank, plus tie group sizes."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = r
        if j > i:
            ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """U for ``a``: the number of pairs with a > b, ties counting one half."""
    a = _check(a, "a")
    b = _check(b, "b")
    ranks, _ = midranks(a + b)
    return sum(ranks[:len(a)]) - len(a) * (len(a) + 1) / 2


@lru_cache(maxsize=None)
def _u_counts(m: int, n: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U in 0..m*n (no ties)."""
    if m == 0 or n == 0:
        return (1,)
    # the largest observation is either from the first sample (adds n to U) or not
    with_a = _u_counts(m - 1, n)
    without = _u_counts(m, n - 1)
    out = [0] * (m * n + 1)
    for u, c in enumerate(without):
        out[u] += c
    for u, c in enumerate(with_a):
        out[u + n] += c
    return tuple(out)


def mann_whitney_exact_p(u: float, m: int, n: int) -> float:
    counts = _u_counts(m, n)
    total = sum(counts)
    k = int(round(u))
    lower = sum(counts[:k + 1])
    upper = sum(counts[k:])
    return min(1.0, 2 * min(lower, upper) / total)


def mann_whitney_u(a: Sequence[float], b: Sequence[float], method: str | None = None) -> TestResult:
    """Two-sided Mann-Whitney U test; the statistic is U for ``a``.

    Exact enumeration is used when the pooled size is at most 16 and there are
    no ties, otherwise the normal approximation with tie and continuity
    corrections. ``method`` forces one or the other.
    """
    a = _check(a, "a")
    b = _check(b, "b")
    m, n = len(a), len(b)
    ranks, ties = midranks(a + b)
    u = sum(ranks[:m]) - m * (m + 1) / 2
    if method is None:
        method = EXACT if m + n <= EXACT_MAX_N and not ties else NORMAL
    if method == EXACT:
        if ties:
            raise StatsError("exact enumeration needs tie-free samples")
        return TestResult(u, mann_whitney_exact_p(u, m, n), EXACT)
    if method != NORMAL:
        raise StatsError(f"unknown method {method!r}")
    big = m + n
    mu = m * n / 2
    tie_term = sum(t ** 3 - t for t in ties) / (big * (big - 1)) if big > 1 else 0.0
    var = m * n / 12 * ((big + 1) - tie_term)
    if var <= 0:
        return TestResult(u, 1.0, NORMAL)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return TestResult(u, min(1.0, math.erfc(z / math.sqrt(2))), NORMAL)


def vargha_delaney_a12(a: Sequence[float], b: Sequence[float]) -> float:
    """Probability that a draw from ``a`` beats one from ``b`` (ties count half)."""
    a = _check(a, "a")
    b = _check(b, "b")
    m, n = len(a), len(b)
    ranks, _ = midranks(a + b)
    # twice the rank sum is an integer, so this is a single exact division
    twice_r = int(round(2 * sum(ranks[:m])))
    return (twice_r - m * (m + 1)) / (2 * m * n)


# -- Shapiro-Wilk -----------------------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coef: Sequence[float], x: float) -> float:
    out = 0.0
    for c in reversed(coef):
        out = out * x + c
    return out


def shapiro_wilk_coefficients(n: int) -> list[float]:
    """Positive half of the antisymmetric weight vector, largest first."""
    half = n // 2
    if n == 3:
        return [math.sqrt(0.5)]
    an25 = n + 0.25
    m = [_STD.inv_cdf((i - 0.375) / an25) for i in range(1, half + 1)]
    summ2 = 2 * sum(v * v for v in m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
        return [a1, a2] + [-v / fac for v in m[2:]]
    fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
    return [a1] + [-v / fac for v in m[1:]]


def shapiro_wilk(sample: Sequence[float]) -> TestResult:
    """W statistic and its p-value for 3 <= n <= 5000."""
    x = sorted(_check(sample))
    n = len(x)
    if not 3 <= n <= 5000:
        raise StatsError(f"Shapiro-Wilk needs 3..5000 observations, got {n}")
    if x[-1] - x[0] < 1e-19 * max(1.0, abs(x[0])):
        raise StatsError("Shapiro-Wilk is undefined for a constant sample")
    a = shapiro_wilk_coefficients(n)
    weights = [0.0] * n
    for i, v in enumerate(a):
        weights[i] = -v
        weights[n - 1 - i] = v
    mean = sum(x) / n
    # centering and scaling keep the products well conditioned
    scale = x[-1] - x[0]
    xs = [(v - mean) / scale for v in x]
    ss = sum(v * v for v in xs)
    num = sum(w * v for w, v in zip(weights, xs))
    w = min(1.0, num * num / ss)
    if n == 3:
        p = 6 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3)
        return TestResult(w, min(1.0, max(0.0, p)), NORMAL)
    y = math.log(1 - w) if w < 1 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return TestResult(w, 1e-99, NORMAL)
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    if y == -math.inf:
        return TestResult(w, 1.0, NORMAL)
    p = 0.5 * math.erfc((y - mu) / (sigma * math.sqrt(2)))
    return TestResult(w, min(1.0, max(0.0, p)), NORMAL)


# -- pairwise comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class PairResult:
    metric: str
    instance_a: str
    instance_b: str
    u_statistic: float
    p_value: float
    a12: float


@dataclass
class Matrices:
    """Square p-value and A12 matrices; ``None`` on the diagonal."""

    metric: str
    instances: list[str]
    p: list[list[float | None]]
    a12: list[list[float | None]]
    pairs: list[PairResult]

    def p_value(self, a: str, b: str) -> float | None:
        return self.p[self.instances.index(a)][self.instances.index(b)]

    def a12_of(self, a: str, b: str) -> float | None:
        return self.a12[self.instances.index(a)][self.instances.index(b)]


def pairwise_matrices(samples: Mapping[str, Sequence[float]], metric: str,
                      instances: Iterable[str] | None = None) -> Matrices:
    """All-pairs Mann-Whitney p and A12(row, col) over the given instances."""
    names = list(instances) if instances is not None else list(samples)
    for name in names:
        if name not in samples:
            raise StatsError(f"no results for instance {name}")
        if len(samples[name]) < 2:
            raise StatsError(f"instance {name} needs at least 2 replications")
    k = len(names)
    p: list[list[float | None]] = [[None] * k for _ in range(k)]
    a12: list[list[float | None]] = [[None] * k for _ in range(k)]
    pairs = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            a, b = samples[names[i]], samples[names[j]]
            a12[i][j] = vargha_delaney_a12(a, b)
            if j > i:
                res = mann_whitney_u(a, b)
                p[i][j] = p[j][i] = res.p_value
                pairs.append(PairResult(metric, names[i], names[j], res.statistic, res.p_value, a12[i][j]))
    return Matrices(metric, names, p, a12, pairs)


def format_matrix(names: Sequence[str], values: Sequence[Sequence[float | None]], title: str,
                  digits: int = 4) -> str:
    """Aligned text rendering; the diagonal shows ``-``."""
    cells = [[("-" if v is None else f"{v:.{digits}f}") for v in row] for row in values]
    width = max(len(s) for s in list(names) + [c for row in cells for c in row])
    lines = [title, " " * width + "  " + "  ".join(n.rjust(width) for n in names)]
    for name, row in zip(names, cells):
        lines.append(name.rjust(width) + "  " + "  ".join(c.rjust(width) for c in row))
    return "\n".join(lines) + "\n"


def mean(values: Sequence[float]) -> float:
    values = _check(values)
    return math.fsum(values) / len(values)
