"""Deferred acceptance, stability checking and rank statistics.

A matching is an injection of men into women.  In the unbalanced market a
woman left single accepts anyone, so a man who prefers her to his wife
forms a blocking pair with her.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from .errors import DomainError
from .prefgen import Instance

UNMATCHED = -1


class Side(enum.Enum):
    MEN = "men"
    WOMEN = "women"


@dataclass(frozen=True)
class Matching:
    wife_of: tuple[int, ...]
    husband_of: tuple[int, ...]

    @classmethod
    def from_wives(cls, wife_of: Sequence[int], n2: int) -> "Matching":
        husband = [UNMATCHED] * n2
        for m, w in enumerate(wife_of):
            if not 0 <= w < n2:
                raise DomainError(f"man {m} matched to out-of-range woman {w}")
            if husband[w] != UNMATCHED:
                raise DomainError(f"woman {w} matched twice")
            husband[w] = m
        return cls(tuple(int(w) for w in wife_of), tuple(husband))

    @property
    def key(self) -> tuple[int, ...]:
        return self.wife_of

    @property
    def matched_women(self) -> frozenset[int]:
        return frozenset(self.wife_of)

    @property
    def unmatched_women(self) -> list[int]:
        return [w for w, h in enumerate(self.husband_of) if h == UNMATCHED]

    def to_json(self) -> dict[str, Any]:
        return {"wife_of": list(self.wife_of), "unmatched_women": self.unmatched_women}

    @classmethod
    def from_json(cls, obj: dict[str, Any], n2: int) -> "Matching":
        try:
            wives = [int(w) for w in obj["wife_of"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed matching record: {exc}") from exc
        M = cls.from_wives(wives, n2)
        if "unmatched_women" in obj and sorted(obj["unmatched_women"]) != M.unmatched_women:
            raise DomainError("unmatched_women disagrees with wife_of")
        return M


@dataclass(frozen=True)
class RankPair:
    """Total wife rank ``Q`` and total husband rank ``R`` of a matching."""

    Q: int
    R: int
    proposals: Optional[int] = None


def check_matching(inst: Instance, M: Matching) -> None:
    """Raise DomainError unless ``M`` is a structurally valid injection for ``inst``."""
    n1, n2 = inst.n1, inst.n2
    if len(M.wife_of) != n1 or len(M.husband_of) != n2:
        raise DomainError(f"matching sized ({len(M.wife_of)}, {len(M.husband_of)}), "
                          f"instance is ({n1}, {n2})")
    seen = set()
    for m, w in enumerate(M.wife_of):
        if not 0 <= w < n2:
            raise DomainError(f"man {m} matched to out-of-range woman {w}")
        if w in seen:
            raise DomainError(f"woman {w} matched twice")
        seen.add(w)
        if M.husband_of[w] != m:
            raise DomainError(f"husband_of[{w}] is not the inverse of wife_of")
    single = sum(1 for h in M.husband_of if h == UNMATCHED)
    if single != n2 - n1:
        raise DomainError(f"expected {n2 - n1} unmatched women, found {single}")


def _propose_men(inst: Instance) -> tuple[list[int], list[int], int]:
    mp, wr = inst.mp, inst.wr
    n1, n2 = inst.n1, inst.n2
    wife = [UNMATCHED] * n1
    husband = [UNMATCHED] * n2
    nxt = [0] * n1
    proposals = 0
    for start in range(n1):
        m = start
        # stack discipline: a displaced man proposes again at once
        while m != UNMATCHED:
            w = mp[m][nxt[m]]
            nxt[m] += 1
            proposals += 1
            h = husband[w]
            if h == UNMATCHED:
                husband[w] = m
                wife[m] = w
                m = UNMATCHED
            elif wr[w][m] < wr[w][h]:
                husband[w] = m
                wife[m] = w
                wife[h] = UNMATCHED
                m = h
    return wife, husband, proposals


def _propose_women(inst: Instance) -> tuple[list[int], list[int], int]:
    wp, mr = inst.wp, inst.mr
    n1, n2 = inst.n1, inst.n2
    wife = [UNMATCHED] * n1
    husband = [UNMATCHED] * n2
    nxt = [0] * n2
    proposals = 0
    for start in range(n2):
        w = start
        while w != UNMATCHED:
            if nxt[w] == n1:
                # rejected by every man: single in every stable matching
                break
            m = wp[w][nxt[w]]
            nxt[w] += 1
            proposals += 1
            cur = wife[m]
            if cur == UNMATCHED:
                wife[m] = w
                husband[w] = m
                w = UNMATCHED
            elif mr[m][w] < mr[m][cur]:
                wife[m] = w
                husband[w] = m
                husband[cur] = UNMATCHED
                w = cur
    return wife, husband, proposals


def propose(inst: Instance, side: Side = Side.MEN) -> tuple[Matching, RankPair]:
    """Side-optimal stable matching by McVitie-Wilson deferred acceptance.

    ``side=Side.MEN`` gives the men-optimal matching, for which the
    proposal count equals Q because no man proposes twice to one woman.
    """
    side = Side(side)
    if side is Side.MEN:
        wife, husband, proposals = _propose_men(inst)
    else:
        wife, husband, proposals = _propose_women(inst)
    M = Matching(tuple(wife), tuple(husband))
    rp = _ranks(inst, M)
    return M, RankPair(rp.Q, rp.R, proposals)


def _is_stable(inst: Instance, M: Matching) -> bool:
    mp, mr, wr = inst.mp, inst.mr, inst.wr
    husband = M.husband_of
    for m, w0 in enumerate(M.wife_of):
        row = mp[m]
        for p in range(mr[m][w0] - 1):
            w = row[p]
            h = husband[w]
            if h == UNMATCHED or wr[w][m] < wr[w][h]:
                return False
    return True


def is_stable(inst: Instance, M: Matching) -> bool:
    """True iff no man and woman would both rather be together.

    A single woman counts as preferring any man to her situation.
    """
    check_matching(inst, M)
    return _is_stable(inst, M)


def blocking_pairs(inst: Instance, M: Matching) -> list[tuple[int, int]]:
    check_matching(inst, M)
    mp, mr, wr = inst.mp, inst.mr, inst.wr
    out = []
    for m, w0 in enumerate(M.wife_of):
        for p in range(mr[m][w0] - 1):
            w = mp[m][p]
            h = M.husband_of[w]
            if h == UNMATCHED or wr[w][m] < wr[w][h]:
                out.append((m, w))
    return out


def _ranks(inst: Instance, M: Matching) -> RankPair:
    mr, wr = inst.mr, inst.wr
    Q = sum(mr[m][w] for m, w in enumerate(M.wife_of))
    R = sum(wr[w][m] for m, w in enumerate(M.wife_of))
    return RankPair(Q, R)


def ranks(inst: Instance, M: Matching) -> RankPair:
    check_matching(inst, M)
    return _ranks(inst, M)
