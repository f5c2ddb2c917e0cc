"""Monte Carlo evaluation of the stability-probability integrals.

Fix the identity injection (man i with woman i).  Conditioned on the
latent values ``x_i`` (man i's value of his wife) and ``y_j`` (woman j's
value of her husband), the pairwise stability events are independent,
which turns each probability into an integral over ``[0, 1]^(2 n1)``:

* stable:              prod_{i != j} (1 - x_i y_j) * prod_h (1 - x_h)^(n2 - n1)
* stable with Q=k,R=l: coefficient of xi^(k-n1) eta^(l-n1) in
                       prod_{i != j} (xb_i yb_j + x_i yb_j xi + xb_i y_j eta) * prod_h xb_h^(n2 - n1)
* rotation (1..r) exposed as well: prod_{k<=r} x_k y_k times the stable
  integrand with the factors (i, i+1 mod r), i <= r, removed.

Each integral is estimated by plain Monte Carlo.  Samples are split into a
fixed number of batches, each drawn from its own stream, and the standard
error comes from the spread of the batch means.  The ``empirical_*``
functions estimate the same probabilities by simulating instances and
serve as independent checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import DomainError
from .prefgen import InstanceBatch, gen_instance_batch

DEFAULT_BATCHES = 64
MAX_POLY_N1 = 6
EMPIRICAL_CHUNK = 50_000


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    samples: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.value - 3 * self.std_error, self.value + 3 * self.std_error

    def to_json(self, formula_id: str | None = None) -> dict:
        out = {"value": self.value, "std_error": self.std_error, "samples": self.samples}
        if formula_id is not None:
            out["formula_id"] = formula_id
        return out


def agree(a: Estimate, b: Estimate, k: float = 3.0) -> bool:
    """|a - b| within k times the summed standard errors."""
    return abs(a.value - b.value) <= k * (a.std_error + b.std_error)


def _check_market(n1: int, n2: int) -> None:
    if n1 < 1 or n2 < n1:
        raise DomainError(f"need 1 <= n1 <= n2, got n1={n1}, n2={n2}")


def _batch_sizes(samples: int, batches: int) -> list[int]:
    if samples < 1:
        raise DomainError("samples must be positive")
    if batches < 1:
        raise DomainError("batches must be positive")
    b = min(batches, samples)
    q, r = divmod(samples, b)
    return [q + (i < r) for i in range(b)]


def _draws(seed: int, n1: int, batch: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    g = _rng.generator(seed, _rng.NS_QUADRATURE, batch)
    return g.random((size, n1)), g.random((size, n1))


def _reduce(sums: list[float], sizes: list[int]) -> Estimate:
    total = sum(sizes)
    value = math.fsum(sums) / total
    if len(sizes) < 2:
        return Estimate(value, math.inf, total)
    means = np.array(sums) / np.array(sizes)
    se = float(np.std(means, ddof=1) / math.sqrt(len(sizes)))
    return Estimate(value, se, total)


def _offdiag_factor(x: np.ndarray, y: np.ndarray, skip_next: int = 0) -> np.ndarray:
    """prod over i != j of (1 - x_i y_j), dropping (i, i+1 mod r) for i < ``skip_next``."""
    n1 = x.shape[1]
    t = 1.0 - x[:, :, None] * y[:, None, :]
    idx = np.arange(n1)
    t[:, idx, idx] = 1.0
    if skip_next:
        i = np.arange(skip_next)
        t[:, i, (i + 1) % skip_next] = 1.0
    return t.reshape(len(x), -1).prod(axis=1)


def _stable_integrand(x: np.ndarray, y: np.ndarray, n2: int) -> np.ndarray:
    n1 = x.shape[1]
    return _offdiag_factor(x, y) * ((1.0 - x) ** (n2 - n1)).prod(axis=1)


def p_stable_mc(n1: int, n2: int, samples: int, seed: int,
                batches: int = DEFAULT_BATCHES) -> Estimate:
    """Probability that a fixed injection is stable."""
    _check_market(n1, n2)
    sizes = _batch_sizes(samples, batches)
    sums = []
    for b, size in enumerate(sizes):
        x, y = _draws(seed, n1, b, size)
        sums.append(float(_stable_integrand(x, y, n2).sum()))
    return _reduce(sums, sizes)


def p_rotation_mc(n1: int, n2: int, r: int, samples: int, seed: int,
                  batches: int = DEFAULT_BATCHES) -> Estimate:
    """Probability that a fixed injection is stable and pairs 1..r form an exposed rotation."""
    _check_market(n1, n2)
    if not 2 <= r <= n1:
        raise DomainError(f"rotation length must lie in [2, n1], got r={r}, n1={n1}")
    sizes = _batch_sizes(samples, batches)
    sums = []
    for b, size in enumerate(sizes):
        x, y = _draws(seed, n1, b, size)
        v = (x[:, :r] * y[:, :r]).prod(axis=1)
        v *= _offdiag_factor(x, y, skip_next=r)
        v *= ((1.0 - x) ** (n2 - n1)).prod(axis=1)
        sums.append(float(v.sum()))
    return _reduce(sums, sizes)


@dataclass(frozen=True)
class BivariatePoly:
    """Dense coefficients: ``coeffs[u, v]`` multiplies xi^u eta^v."""

    coeffs: np.ndarray

    def __call__(self, xi: float, eta: float) -> float:
        c = self.coeffs
        u = xi ** np.arange(c.shape[0])
        v = eta ** np.arange(c.shape[1])
        return float(u @ c @ v)


def _poly_coeffs(x: np.ndarray, y: np.ndarray, n2: int) -> np.ndarray:
    """Vectorised over the leading axis of x, y (shape (S, n1))."""
    S, n1 = x.shape
    D = n1 * (n1 - 1)
    P = np.zeros((S, D + 1, D + 1))
    P[:, 0, 0] = ((1.0 - x) ** (n2 - n1)).prod(axis=1)
    xb, yb = 1.0 - x, 1.0 - y
    deg = 0
    for i in range(n1):
        for j in range(n1):
            if i == j:
                continue
            c0 = (xb[:, i] * yb[:, j])[:, None, None]
            c1 = (x[:, i] * yb[:, j])[:, None, None]   # man i ranks woman j above his wife
            c2 = (xb[:, i] * y[:, j])[:, None, None]   # woman j ranks man i above her husband
            d = deg + 1
            old = P[:, :d, :d].copy()
            P[:, :d, :d] *= c0
            P[:, 1:d + 1, :d] += c1 * old
            P[:, :d, 1:d + 1] += c2 * old
            deg = d
    return P


def p_joint_poly(x, y, n2: int) -> BivariatePoly:
    """Conditional generating polynomial of (Q - n1, R - n1) on stability."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DomainError("x and y must be vectors of equal length")
    n1 = len(x)
    _check_market(n1, n2)
    if ((x < 0) | (x > 1) | (y < 0) | (y > 1)).any():
        raise DomainError("x and y must lie in [0, 1]")
    return BivariatePoly(_poly_coeffs(x[None, :], y[None, :], n2)[0])


@dataclass(frozen=True)
class JointRankEstimate:
    """Estimates of P(stable, Q=k, R=l) on the grid k, l = n1 .. n1**2."""

    n1: int
    value: np.ndarray
    std_error: np.ndarray
    samples: int
    marginal_k: Estimate | None = None
    total: Estimate | None = None

    def at(self, k: int, l: int) -> Estimate:
        u, v = k - self.n1, l - self.n1
        if not (0 <= u < self.value.shape[0] and 0 <= v < self.value.shape[1]):
            return Estimate(0.0, 0.0, self.samples)
        return Estimate(float(self.value[u, v]), float(self.std_error[u, v]), self.samples)

    def p_k(self) -> np.ndarray:
        """P(stable, Q = n1 + u) for u = 0, 1, ..."""
        return self.value.sum(axis=1)

    def p_l(self) -> np.ndarray:
        """P(stable, R = n1 + v) for v = 0, 1, ..."""
        return self.value.sum(axis=0)


def p_kl_mc(n1: int, n2: int, samples: int, seed: int,
            batches: int = DEFAULT_BATCHES) -> JointRankEstimate:
    """Joint law of (Q, R) on the stability event, sharing draws with ``p_stable_mc``."""
    _check_market(n1, n2)
    if n1 > MAX_POLY_N1:
        raise DomainError(f"n1={n1} exceeds the polynomial guard n1 <= {MAX_POLY_N1}")
    sizes = _batch_sizes(samples, batches)
    D = n1 * (n1 - 1)
    means = np.empty((len(sizes), D + 1, D + 1))
    sums = np.zeros((D + 1, D + 1))
    for b, size in enumerate(sizes):
        x, y = _draws(seed, n1, b, size)
        acc = np.zeros((D + 1, D + 1))
        for lo in range(0, size, 4096):
            acc += _poly_coeffs(x[lo:lo + 4096], y[lo:lo + 4096], n2).sum(axis=0)
        sums += acc
        means[b] = acc / size
    value = sums / samples
    if len(sizes) < 2:
        se = np.full_like(value, math.inf)
    else:
        se = means.std(axis=0, ddof=1) / math.sqrt(len(sizes))
    totals = [float(means[b].sum() * sizes[b]) for b in range(len(sizes))]
    return JointRankEstimate(n1, value, se, samples, total=_reduce(totals, sizes))


# -- empirical counterparts -------------------------------------------------

def _accepts(batch: InstanceBatch, n1: int) -> np.ndarray:
    """accept[b, m, w]: under the identity injection, would woman w take man m?"""
    wr = batch.women_rank
    B, n2, _ = wr.shape
    own = np.diagonal(wr[:, :n1, :n1], axis1=1, axis2=2)   # (B, n1): rank of own husband
    acc = np.ones((B, n1, n2), dtype=bool)                 # single women take anyone
    acc[:, :, :n1] = (wr[:, :n1, :] < own[:, :, None]).transpose(0, 2, 1)
    return acc


def identity_stable_mask(batch: InstanceBatch) -> np.ndarray:
    """Boolean per instance: is man i <-> woman i a stable matching?"""
    mr = batch.men_rank
    n1 = mr.shape[1]
    wife_rank = np.diagonal(mr[:, :, :n1], axis1=1, axis2=2)
    above = mr < wife_rank[:, :, None]
    return ~(above & _accepts(batch, n1)).any(axis=(1, 2))


def identity_rotation_mask(batch: InstanceBatch, r: int) -> np.ndarray:
    """Boolean per instance: identity is stable and ((0,0), ..., (r-1,r-1)) is exposed.

    Man m < r must have woman m+1 (mod r) as the first woman below his
    wife who would accept him; a single woman met earlier disqualifies.
    """
    mr = batch.men_rank
    n1 = mr.shape[1]
    acc = _accepts(batch, n1)
    ok = identity_stable_mask(batch)
    for m in range(r):
        t = (m + 1) % r
        own = mr[:, m, m]
        tgt = mr[:, m, t]
        ok &= tgt > own
        ok &= acc[:, m, t]
        between = (mr[:, m, :] > own[:, None]) & (mr[:, m, :] < tgt[:, None])
        ok &= ~(between & acc[:, m, :]).any(axis=1)
    return ok


def _empirical(n1: int, n2: int, trials: int, seed: int, mask) -> Estimate:
    _check_market(n1, n2)
    if trials < 1:
        raise DomainError("trials must be positive")
    hits = 0
    for c, lo in enumerate(range(0, trials, EMPIRICAL_CHUNK)):
        size = min(EMPIRICAL_CHUNK, trials - lo)
        hits += int(mask(gen_instance_batch(n1, n2, size, seed, chunk=c)).sum())
    p = hits / trials
    return Estimate(p, math.sqrt(p * (1 - p) / trials), trials)


def empirical_p_stable(n1: int, n2: int, trials: int, seed: int) -> Estimate:
    """Fraction of random instances in which the identity injection is stable."""
    return _empirical(n1, n2, trials, seed, identity_stable_mask)


def empirical_p_rotation(n1: int, n2: int, r: int, trials: int, seed: int) -> Estimate:
    """Fraction of random instances with the identity stable and pairs 0..r-1 an exposed rotation."""
    if not 2 <= r <= n1:
        raise DomainError(f"rotation length must lie in [2, n1], got r={r}, n1={n1}")
    return _empirical(n1, n2, trials, seed, lambda b: identity_rotation_mask(b, r))


def expected_stable_count(n1: int, n2: int, p: Estimate) -> Estimate:
    """Scale P(stable) by the number of injections, n2!/(n2-n1)!."""
    k = math.perm(n2, n1)
    return Estimate(k * p.value, k * p.std_error, p.samples)
