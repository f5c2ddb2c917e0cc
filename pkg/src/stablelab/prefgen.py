"""Random preference systems for unbalanced markets.

Men are ``0..n1-1`` and women ``0..n2-1`` with ``n1 <= n2``.  Preference
lists run most-preferred first; rank tables are 1-based (rank 1 = top).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from . import rng as _rng
from .errors import DomainError, InternalError


def _check_shape(n1: int, n2: int) -> None:
    if n1 < 1 or n2 < n1:
        raise DomainError(f"need 1 <= n1 <= n2, got n1={n1}, n2={n2}")


def _inverse_ranks(pref: np.ndarray) -> np.ndarray:
    # argsort of a permutation is its inverse
    return np.argsort(pref, axis=-1).astype(np.int64) + 1


def _is_perm_rows(a: np.ndarray) -> bool:
    return bool(np.array_equal(np.sort(a, axis=-1), np.broadcast_to(np.arange(a.shape[-1]), a.shape)))


@dataclass(frozen=True, eq=False)
class Instance:
    """A complete two-sided preference system.

    ``men_pref[m]`` is a permutation of all women and ``women_pref[w]`` a
    permutation of all men.  The inverse tables ``men_rank`` and
    ``women_rank`` are derived on first access, as are plain-list views
    used by the pure-Python algorithms.
    """

    men_pref: np.ndarray
    women_pref: np.ndarray

    def __post_init__(self) -> None:
        mp = np.ascontiguousarray(self.men_pref, dtype=np.int64)
        wp = np.ascontiguousarray(self.women_pref, dtype=np.int64)
        if mp.ndim != 2 or wp.ndim != 2:
            raise DomainError("preference tables must be two-dimensional")
        n1, n2 = mp.shape
        _check_shape(n1, n2)
        if wp.shape != (n2, n1):
            raise DomainError(f"women_pref must have shape ({n2}, {n1}), got {wp.shape}")
        if not _is_perm_rows(mp) or not _is_perm_rows(wp):
            raise DomainError("every preference row must be a permutation")
        mp.setflags(write=False)
        wp.setflags(write=False)
        object.__setattr__(self, "men_pref", mp)
        object.__setattr__(self, "women_pref", wp)

    @property
    def n1(self) -> int:
        return self.men_pref.shape[0]

    @property
    def n2(self) -> int:
        return self.men_pref.shape[1]

    @cached_property
    def men_rank(self) -> np.ndarray:
        return _inverse_ranks(self.men_pref)

    @cached_property
    def women_rank(self) -> np.ndarray:
        return _inverse_ranks(self.women_pref)

    # list views: indexing nested lists is several times faster than numpy
    # scalar indexing inside the proposal loops
    @cached_property
    def mp(self) -> list[list[int]]:
        return self.men_pref.tolist()

    @cached_property
    def wp(self) -> list[list[int]]:
        return self.women_pref.tolist()

    @cached_property
    def mr(self) -> list[list[int]]:
        return self.men_rank.tolist()

    @cached_property
    def wr(self) -> list[list[int]]:
        return self.women_rank.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (np.array_equal(self.men_pref, other.men_pref)
                and np.array_equal(self.women_pref, other.women_pref))

    __hash__ = None  # type: ignore[assignment]

    def to_json(self) -> dict[str, Any]:
        return {"n1": self.n1, "n2": self.n2,
                "men_pref": self.mp, "women_pref": self.wp}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Instance":
        try:
            n1, n2 = int(obj["n1"]), int(obj["n2"])
            mp, wp = obj["men_pref"], obj["women_pref"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed instance record: {exc}") from exc
        inst = cls(np.asarray(mp), np.asarray(wp))
        if (inst.n1, inst.n2) != (n1, n2):
            raise DomainError("declared n1/n2 disagree with preference tables")
        return inst


@dataclass(frozen=True, eq=False)
class LatentMatrices:
    """Two ``n1 x n2`` matrices of uniforms.

    Man ``i`` ranks women by increasing ``X[i, :]``; woman ``j`` ranks men
    by increasing ``Y[:, j]``.
    """

    X: np.ndarray
    Y: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape  # type: ignore[return-value]


def gen_instance(n1: int, n2: int, seed: int) -> Instance:
    """Draw an instance with independent uniform preference permutations."""
    _check_shape(n1, n2)
    g = _rng.generator(seed, _rng.NS_INSTANCE)
    men = g.permuted(np.broadcast_to(np.arange(n2), (n1, n2)), axis=1)
    women = g.permuted(np.broadcast_to(np.arange(n1), (n2, n1)), axis=1)
    return Instance(men, women)


def _redraw_ties(a: np.ndarray, g: np.random.Generator) -> int:
    """Redraw duplicated entries along each row of ``a`` in place."""
    redrawn = 0
    while True:
        order = np.argsort(a, axis=1, kind="stable")
        srt = np.take_along_axis(a, order, axis=1)
        dup = np.zeros_like(a, dtype=bool)
        hit = srt[:, 1:] == srt[:, :-1]
        if not hit.any():
            return redrawn
        rows, cols = np.nonzero(hit)
        dup[rows, order[rows, cols + 1]] = True
        a[dup] = g.random(int(dup.sum()))
        redrawn += int(dup.sum())


def gen_latents(n1: int, n2: int, seed: int) -> LatentMatrices:
    """Draw the latent uniform matrices, with no ties within X rows or Y columns."""
    _check_shape(n1, n2)
    g = _rng.generator(seed, _rng.NS_LATENT)
    X = g.random((n1, n2))
    Y = g.random((n1, n2))
    _redraw_ties(X, g)
    Yt = np.ascontiguousarray(Y.T)
    _redraw_ties(Yt, g)
    return LatentMatrices(X, np.ascontiguousarray(Yt.T))


def instance_from_latents(L: LatentMatrices) -> Instance:
    X, Y = np.asarray(L.X), np.asarray(L.Y)
    if X.ndim != 2 or X.shape != Y.shape:
        raise DomainError("X and Y must be matrices of equal shape")
    if ((X < 0) | (X >= 1)).any() or ((Y < 0) | (Y >= 1)).any():
        raise DomainError("latent entries must lie in [0, 1)")
    men = np.argsort(X, axis=1, kind="stable")
    women = np.argsort(Y.T, axis=1, kind="stable")
    sx = np.take_along_axis(X, men, axis=1)
    sy = np.take_along_axis(Y.T, women, axis=1)
    if (np.diff(sx, axis=1) == 0).any() or (np.diff(sy, axis=1) == 0).any():
        raise InternalError("tied latent values; generation should have prevented this")
    return Instance(men, women)


@dataclass(frozen=True, eq=False)
class InstanceBatch:
    """Many instances of one shape stacked along a leading axis.

    Used by the vectorised estimators, which need millions of small
    instances; ``instance(i)`` materialises one member.
    """

    men_pref: np.ndarray    # (B, n1, n2)
    women_pref: np.ndarray  # (B, n2, n1)

    def __len__(self) -> int:
        return self.men_pref.shape[0]

    @cached_property
    def men_rank(self) -> np.ndarray:
        return _inverse_ranks(self.men_pref)

    @cached_property
    def women_rank(self) -> np.ndarray:
        return _inverse_ranks(self.women_pref)

    def instance(self, i: int) -> Instance:
        return Instance(self.men_pref[i], self.women_pref[i])


def gen_instance_batch(n1: int, n2: int, count: int, seed: int, chunk: int = 0) -> InstanceBatch:
    """Draw ``count`` independent instances; ``chunk`` selects a sub-stream."""
    _check_shape(n1, n2)
    g = _rng.generator(seed, _rng.NS_BATCH, chunk)
    men = g.permuted(np.broadcast_to(np.arange(n2, dtype=np.int64), (count, n1, n2)), axis=2)
    women = g.permuted(np.broadcast_to(np.arange(n1, dtype=np.int64), (count, n2, n1)), axis=2)
    return InstanceBatch(men, women)
