"""Rotations and the full set of stable matchings.

Starting from the men-optimal matching, every stable matching is reached
by a chain of rotation eliminations.  ``enumerate_all`` walks those chains
depth-first with global deduplication; ``brute_force_all`` filters every
injection and serves as the completeness oracle at small sizes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

from .engine import UNMATCHED, Matching, Side, _is_stable, _ranks, check_matching, propose
from .errors import CapExceeded, DomainError, InternalError, OracleRefusal
from .prefgen import Instance

DEFAULT_CAP = 10**6
DEFAULT_ORACLE_BOUND = 10**7


@dataclass(frozen=True)
class Rotation:
    """Cyclic sequence of matched pairs ``((m_1, w_1), ..., (m_r, w_r))``.

    Eliminating it gives ``m_i`` the woman ``w_{i+1}``.  Stored rotated so
    that the smallest man comes first.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pairs = tuple((int(m), int(w)) for m, w in self.pairs)
        if len(pairs) < 2:
            raise DomainError("a rotation has at least two pairs")
        men = [m for m, _ in pairs]
        women = [w for _, w in pairs]
        if len(set(men)) != len(men) or len(set(women)) != len(women):
            raise DomainError("rotation men and women must be distinct")
        k = men.index(min(men))
        object.__setattr__(self, "pairs", pairs[k:] + pairs[:k])

    def __len__(self) -> int:
        return len(self.pairs)

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in self.pairs]


@dataclass
class StableSet:
    matchings: list[Matching]
    men_optimal: Matching
    women_optimal: Matching
    rotations: frozenset[Rotation] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.matchings)

    @property
    def keys(self) -> frozenset[tuple[int, ...]]:
        return frozenset(M.key for M in self.matchings)

    @property
    def n1(self) -> int:
        return len(self.men_optimal.wife_of)

    @property
    def n2(self) -> int:
        return len(self.men_optimal.husband_of)

    @property
    def per_man_partner_count(self) -> list[int]:
        return [len({M.wife_of[m] for M in self.matchings}) for m in range(self.n1)]

    @property
    def per_woman_partner_count(self) -> list[int]:
        out = []
        for w in range(self.n2):
            hs = {M.husband_of[w] for M in self.matchings} - {UNMATCHED}
            out.append(len(hs))
        return out

    def to_json(self, inst: Instance | None = None) -> dict[str, Any]:
        m_frac, w_frac, rot_len = multiplicity(self)
        summary: dict[str, Any] = {
            "size": len(self), "m_frac": m_frac, "w_frac": w_frac,
            "total_rotation_length": rot_len,
            "men_optimal": list(self.men_optimal.wife_of),
            "women_optimal": list(self.women_optimal.wife_of),
        }
        records = []
        for M in sorted(self.matchings, key=lambda M: M.key):
            rec = M.to_json()
            if inst is not None:
                rp = _ranks(inst, M)
                rec.update(Q=rp.Q, R=rp.R)
            records.append(rec)
        if inst is not None:
            qs = [r["Q"] for r in records]
            rs = [r["R"] for r in records]
            summary.update(q_min=min(qs), q_max=max(qs), r_min=min(rs), r_max=max(rs))
        return {"matchings": records, "rotations": sorted(r.to_json() for r in self.rotations),
                "summary": summary}


def _successor_men(inst: Instance, M: Matching) -> dict[int, int]:
    """Map each man to the husband of his next willing woman, where one exists.

    The scan starts just below his wife.  Meeting a single woman ends it
    without a successor: she would take him, so any rotation through him
    would leave a blocking pair.
    """
    mp, mr, wr = inst.mp, inst.mr, inst.wr
    husband = M.husband_of
    n2 = inst.n2
    nxt: dict[int, int] = {}
    for m, w0 in enumerate(M.wife_of):
        row = mp[m]
        for p in range(mr[m][w0], n2):
            w = row[p]
            h = husband[w]
            if h == UNMATCHED:
                break
            if wr[w][m] < wr[w][h]:
                nxt[m] = h
                break
    return nxt


def _exposed(inst: Instance, M: Matching) -> list[Rotation]:
    nxt = _successor_men(inst, M)
    state: dict[int, int] = {}  # 1 = on current path, 2 = finished
    found = []
    for start in nxt:
        if start in state:
            continue
        path = []
        m = start
        while m in nxt and m not in state:
            state[m] = 1
            path.append(m)
            m = nxt[m]
        if state.get(m) == 1:
            cycle = path[path.index(m):]
            found.append(Rotation(tuple((c, M.wife_of[c]) for c in cycle)))
        for p in path:
            state[p] = 2
    return sorted(found, key=lambda r: r.pairs)


def exposed_rotations(inst: Instance, M: Matching) -> list[Rotation]:
    """Rotations exposed in the stable matching ``M``."""
    check_matching(inst, M)
    if not _is_stable(inst, M):
        raise DomainError("exposed_rotations requires a stable matching")
    return _exposed(inst, M)


def _eliminate(inst: Instance, M: Matching, rho: Rotation) -> Matching:
    wife = list(M.wife_of)
    husband = list(M.husband_of)
    pairs = rho.pairs
    r = len(pairs)
    for i, (m, _) in enumerate(pairs):
        w_next = pairs[(i + 1) % r][1]
        wife[m] = w_next
        husband[w_next] = m
    return Matching(tuple(wife), tuple(husband))


def eliminate(inst: Instance, M: Matching, rho: Rotation) -> Matching:
    """Re-pair each rotation man with the next woman of the cycle."""
    if rho not in exposed_rotations(inst, M):
        raise DomainError(f"rotation {rho.pairs} is not exposed in the matching")
    return _eliminate(inst, M, rho)


def enumerate_all(inst: Instance, cap: int = DEFAULT_CAP) -> StableSet:
    """All stable matchings, by depth-first rotation elimination from the men-optimal one."""
    M1, _ = propose(inst, Side.MEN)
    Mw, _ = propose(inst, Side.WOMEN)
    seen = {M1.key: M1}
    rotations: set[Rotation] = set()
    stack = [M1]
    while stack:
        M = stack.pop()
        for rho in _exposed(inst, M):
            rotations.add(rho)
            nM = _eliminate(inst, M, rho)
            if nM.key not in seen:
                if len(seen) >= cap:
                    raise CapExceeded(cap)
                seen[nM.key] = nM
                stack.append(nM)
    if Mw.key not in seen:
        raise InternalError("women-optimal matching not reached by rotation elimination")
    return StableSet(list(seen.values()), M1, seen[Mw.key], frozenset(rotations))


def injection_count(n1: int, n2: int) -> int:
    return math.perm(n2, n1)


def _extreme(matchings: list[Matching], inst: Instance, men_side: bool) -> Matching:
    """The member giving every man (or every woman) their best partner in the set."""
    mr, wr = inst.mr, inst.wr
    if men_side:
        best = [min((M.wife_of[m] for M in matchings), key=lambda w: mr[m][w])
                for m in range(inst.n1)]
    else:
        best = [UNMATCHED] * inst.n2
        for w in range(inst.n2):
            hs = {M.husband_of[w] for M in matchings} - {UNMATCHED}
            if hs:
                best[w] = min(hs, key=lambda m: wr[w][m])
        wives = [UNMATCHED] * inst.n1
        for w, m in enumerate(best):
            if m != UNMATCHED:
                wives[m] = w
        best = wives
    for M in matchings:
        if list(M.wife_of) == best:
            return M
    raise InternalError("stable set has no side-optimal member")


def brute_force_all(inst: Instance, bound: int = DEFAULT_ORACLE_BOUND) -> StableSet:
    """Every stable matching, by testing all ``n2!/(n2-n1)!`` injections."""
    count = injection_count(inst.n1, inst.n2)
    if count > bound:
        raise OracleRefusal(f"{count} injections exceed the oracle bound {bound}")
    n2 = inst.n2
    found = []
    for wives in itertools.permutations(range(n2), inst.n1):
        M = Matching.from_wives(wives, n2)
        if _is_stable(inst, M):
            found.append(M)
    rotations = frozenset(rho for M in found for rho in _exposed(inst, M))
    return StableSet(found, _extreme(found, inst, True), _extreme(found, inst, False), rotations)


def multiplicity(ss: StableSet) -> tuple[float, float, int]:
    """Fractions of men and of women with two or more stable partners, and total rotation length."""
    m_frac = sum(1 for c in ss.per_man_partner_count if c >= 2) / ss.n1
    w_frac = sum(1 for c in ss.per_woman_partner_count if c >= 2) / ss.n2
    return m_frac, w_frac, sum(len(r) for r in ss.rotations)


def same_set(a: StableSet, b: StableSet) -> bool:
    return a.keys == b.keys


def matched_women_invariant(matchings: Iterable[Matching]) -> bool:
    sets = {M.matched_women for M in matchings}
    return len(sets) <= 1
