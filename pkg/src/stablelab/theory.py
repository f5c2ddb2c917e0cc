"""Closed-form predictions for unbalanced random markets.

Everything is expressed through the scale ``s = log(n2 / (n2 - n1))``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import rng as _rng
from .errors import DomainError

REGIME_THRESHOLD = 3.0
DEFAULT_A = 0.4
DEFAULT_B = 0.4


@dataclass(frozen=True)
class MarketShape:
    n1: int
    n2: int

    def __post_init__(self) -> None:
        if not 1 <= self.n1 < self.n2:
            raise DomainError(f"need n2 > n1 >= 1, got ({self.n1}, {self.n2})")

    @property
    def ratio(self) -> float:
        return self.n2 / self.n1


def _shape(shape: MarketShape | tuple[int, int]) -> MarketShape:
    return shape if isinstance(shape, MarketShape) else MarketShape(*shape)


def s_of(shape: MarketShape | tuple[int, int]) -> float:
    sh = _shape(shape)
    # log1p form keeps precision when n1 << n2
    return math.log1p(sh.n1 / (sh.n2 - sh.n1))


def f_of(x: float) -> float:
    """(e^x - 1 - x) / (x (e^x - 1)), evaluated without cancellation near 0."""
    if not x > 0:
        raise DomainError(f"f is defined for x > 0, got {x}")
    if x < 0.1:
        # 1/x - 1/(e^x - 1) expanded in Bernoulli numbers; next term < 3e-17
        x2 = x * x
        return 0.5 - x / 12 * (1 - x2 / 60 * (1 - x2 / 42 * (1 - x2 / 40)))
    if x > 700:
        return 1.0 / x
    return 1.0 / x - 1.0 / math.expm1(x)


F_AT_ZERO = 0.5


def _s_over_expm1(s: float) -> float:
    if s == 0:
        return 1.0
    if s > 700:
        return 0.0
    return s / math.expm1(s)


def h_of(shape: MarketShape | tuple[int, int]) -> float:
    return 2.0 - _s_over_expm1(s_of(shape))


def expected_stable_matchings(shape: MarketShape | tuple[int, int]) -> float:
    """Asymptotic mean number of stable matchings.

    n1 * exp(-(e^s - 1 - s)/(e^s - 1)) / ((n2 - n1) s).
    """
    sh = _shape(shape)
    s = s_of(sh)
    # (e^s - 1 - s)/(e^s - 1) = 1 - s/(e^s - 1)
    return sh.n1 * math.exp(_s_over_expm1(s) - 1.0) / ((sh.n2 - sh.n1) * s)


def es_near_balanced(shape: MarketShape | tuple[int, int]) -> float:
    """Limit form when n2/n1 -> 1: e^-1 n1 / ((n2 - n1) log n1)."""
    sh = _shape(shape)
    if sh.n1 < 2:
        raise DomainError("near-balanced limit needs n1 >= 2")
    return math.exp(-1) * sh.n1 / ((sh.n2 - sh.n1) * math.log(sh.n1))


def es_ratio_to_infinity() -> float:
    return 1.0


def lambda_c(c: float) -> float:
    if not c > 1:
        raise DomainError(f"lambda(c) needs c > 1, got {c}")
    return (c / (c - 1)) ** (c - 1)


def es_fixed_ratio(c: float) -> float:
    """Limit of the mean number of stable matchings when n2/n1 -> c."""
    lam = lambda_c(c)
    return math.exp(-1) * lam / math.log(lam)


def tolerances(shape: MarketShape | tuple[int, int], a: float = DEFAULT_A, b: float = DEFAULT_B,
               threshold: float = REGIME_THRESHOLD) -> tuple[float, float]:
    """Concentration widths (delta, delta_star) for Q and R.

    delta is s^-b above ``threshold`` and n1^-a otherwise;
    delta_star = delta / (s f(s)).
    """
    if not (0 < a < 0.5 and 0 < b < 0.5):
        raise DomainError(f"exponents must lie in (0, 1/2), got a={a}, b={b}")
    sh = _shape(shape)
    s = s_of(sh)
    delta = s ** -b if s > threshold else sh.n1 ** -a
    return delta, delta / (s * f_of(s))


def coupon_mean(n1: int, n2: int) -> float:
    """E[N] = n2 (H_{n2} - H_{n2-n1}): throws until n1 of n2 boxes are occupied."""
    if not 1 <= n1 <= n2:
        raise DomainError(f"need 1 <= n1 <= n2, got ({n1}, {n2})")
    j = np.arange(n1, dtype=np.float64)
    return math.fsum(n2 / (n2 - j))


@dataclass(frozen=True)
class Prediction:
    n1: int
    n2: int
    s: float
    ES: float
    q_center: float
    r_center: float
    delta: float
    delta_star: float
    h: float
    coupon_mean: float

    def to_json(self) -> dict:
        return asdict(self)


def predict(shape: MarketShape | tuple[int, int], a: float = DEFAULT_A, b: float = DEFAULT_B,
            threshold: float = REGIME_THRESHOLD) -> Prediction:
    sh = _shape(shape)
    s = s_of(sh)
    delta, delta_star = tolerances(sh, a, b, threshold)
    return Prediction(
        n1=sh.n1, n2=sh.n2, s=s,
        ES=expected_stable_matchings(sh),
        q_center=sh.n2 * s,
        r_center=sh.n1 ** 2 * f_of(s),
        delta=delta, delta_star=delta_star,
        h=h_of(sh),
        coupon_mean=coupon_mean(sh.n1, sh.n2),
    )


@dataclass(frozen=True)
class SpacingsStats:
    mean_nTn: float
    mean_Lplus_scaled: float
    p_nTn_ge_3: float


def spacings_stats(n: int, trials: int, seed: int) -> SpacingsStats:
    """Monte Carlo of the n spacings cut from [0, 1] by n - 1 uniform points.

    Returns the means of n*T_n (T_n the sum of squared spacings) and of
    L_n^+ / (log n / n) (L_n^+ the largest spacing), plus the frequency
    of n*T_n >= 3.
    """
    if n < 2 or trials < 1:
        raise DomainError(f"need n >= 2 and trials >= 1, got n={n}, trials={trials}")
    g = _rng.generator(seed, _rng.NS_SPACINGS)
    nT = np.empty(trials)
    lplus = np.empty(trials)
    for t in range(trials):
        cuts = np.sort(g.random(n - 1))
        L = np.diff(cuts, prepend=0.0, append=1.0)
        nT[t] = n * np.dot(L, L)
        lplus[t] = L.max()
    scale = math.log(n) / n
    return SpacingsStats(float(nT.mean()), float((lplus / scale).mean()), float((nT >= 3).mean()))
