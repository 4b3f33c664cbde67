"""Exact half-rate feasibility tests for the 3-user channel.

Whether every user can transmit half the time is a 2-adic question about
four alternating delay sums.  This module implements the closed-form test,
the constructive chain-graph pattern builder behind it, and the bounded
cycle-valuation check that generalizes the criterion to K users.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .channel import NormalizedChannel
from .errors import DomainError
from .graph import PeriodicPattern

INF = math.inf


def two_adic_valuation(n: int):
    """Exponent of 2 in n's factorization; infinity for n = 0."""
    if n == 0:
        return INF
    n = abs(int(n))
    return (n & -n).bit_length() - 1


@dataclass(frozen=True)
class CycleSums:
    """The four alternating delay sums and their 2-adic valuations.

    ``l`` walks all six cross links once; ``l1``, ``l2``, ``l3`` are the
    twin separations of users 1, 2, 3 inside one walk cycle.
    """

    l: int
    l1: int
    l2: int
    l3: int
    gamma: object
    gamma1: object
    gamma2: object
    gamma3: object

    @classmethod
    def from_normalized(cls, nc: NormalizedChannel) -> "CycleSums":
        if nc.K != 3:
            raise DomainError("cycle sums are defined for K = 3")
        lp = nc.lp
        # symbol key (1-based rx,tx): l'_uv = lp[u-1][v-1]
        l1 = int(lp[0, 2] + lp[2, 1] + lp[1, 0])          # l'_13+l'_32+l'_21
        l2 = int(lp[1, 0] + lp[0, 1])                     # l'_21+l'_12
        l3 = int(lp[2, 0] + lp[0, 2])                     # l'_31+l'_13
        l = int(lp[2, 0] + lp[0, 2] + lp[2, 1] + lp[1, 0] + lp[0, 1] + lp[1, 2])
        return cls(
            l=l, l1=l1, l2=l2, l3=l3,
            gamma=two_adic_valuation(l),
            gamma1=two_adic_valuation(l1),
            gamma2=two_adic_valuation(l2),
            gamma3=two_adic_valuation(l3),
        )

    def seed_count_exponent(self) -> int:
        """g = gcd(l1, l2/2, l3/2, l/2); zero terms drop out of the gcd."""
        return math.gcd(abs(self.l1), abs(self.l2) // 2,
                        abs(self.l3) // 2, abs(self.l) // 2)


@dataclass(frozen=True)
class HalfRateVerdict:
    achievable: bool
    sums: CycleSums
    pattern_count: int | None = None
    witness: PeriodicPattern | None = None


def theorem3_check(nc: NormalizedChannel, with_witness: bool = True) -> HalfRateVerdict:
    """Decide whether the 3-user channel admits density-1/2 patterns.

    Achievable iff gamma1 < gamma2, gamma1 < gamma3 and gamma1 < gamma
    (with n < inf true and inf < inf false); then exactly 2^g patterns
    exist, g the gcd exponent above.
    """
    sums = CycleSums.from_normalized(nc)
    ok = (sums.gamma1 < sums.gamma2
          and sums.gamma1 < sums.gamma3
          and sums.gamma1 < sums.gamma)
    if not ok:
        return HalfRateVerdict(achievable=False, sums=sums)
    g = sums.seed_count_exponent()
    witness = None
    if with_witness:
        witness = construct_half_rate_pattern(nc, seeds=("I",) * g)
    return HalfRateVerdict(
        achievable=True, sums=sums, pattern_count=2 ** g, witness=witness
    )


class _ParityDSU:
    """Union-find with an equal/opposite parity relation to each root."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.parity = [0] * n    # parity relative to parent

    def find(self, x: int):
        root = x
        par = 0
        while self.parent[root] != root:
            par ^= self.parity[root]
            root = self.parent[root]
        # path compression
        while self.parent[x] != root:
            nxt = self.parent[x]
            nxt_par = par ^ self.parity[x]
            self.parent[x] = root
            self.parity[x] = par
            x, par = nxt, nxt_par
        return root, par

    def union(self, a: int, b: int, rel: int) -> bool:
        """Impose parity(a) xor parity(b) = rel; False on contradiction."""
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            return (pa ^ pb) == rel
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ rel
        return True


# Walk structure: positions q = 0..5 visit users (3,1,3,2,1,2) (1-based) and
# traverse each cross link once against its direction, so consecutive
# positions are genuine interference conflicts.  Twins (two chain slots
# denoting one graph vertex) pair q=0/q=2, q=1/q=4 and q=3/q=5.
_WALK_USERS = (2, 0, 2, 1, 0, 1)       # 0-based users per position
_FIRST_POS = {2: 0, 0: 1, 1: 3}        # first walk position of each user
_SECOND_POS = {2: 2, 0: 4, 1: 5}


def _walk_offsets(nc: NormalizedChannel):
    lp = nc.lp
    deltas = (
        -int(lp[2, 0]),   # into position 1 along link (3<-1)
        -int(lp[0, 2]),   # (1<-3)
        -int(lp[2, 1]),   # (3<-2)
        -int(lp[1, 0]),   # (2<-1)
        -int(lp[0, 1]),   # (1<-2)
        -int(lp[1, 2]),   # (2<-3), closes the cycle
    )
    offs = [0]
    for d in deltas[:-1]:
        offs.append(offs[-1] + d)
    return tuple(offs), deltas


def _phase_structure(nc: NormalizedChannel, sums: CycleSums):
    """Solve the twin-consistency 2-coloring over the chain indices.

    Chains are indexed modulo m = |l| (or the step subgroup period when
    l = 0).  Twin pairings impose: equal phases at steps l3 and l2, opposite
    phases at step l1.  Returns (m, dsu, component roots in index order).
    """
    if sums.l != 0:
        m = abs(sums.l)
    else:
        m = math.gcd(2 * abs(sums.l1), abs(sums.l2), abs(sums.l3))
        if m == 0:
            raise DomainError("all cycle sums vanish; no half-rate structure")
    dsu = _ParityDSU(m)
    ok = True
    for i in range(m):
        ok &= dsu.union(i, (i + sums.l3) % m, 0)
        ok &= dsu.union(i, (i + sums.l2) % m, 0)
        ok &= dsu.union(i, (i + sums.l1) % m, 1)
    if not ok:
        return m, None, None
    roots = []
    seen = set()
    for i in range(m):
        r, _ = dsu.find(i)
        if r not in seen:
            seen.add(r)
            roots.append(r)
    return m, dsu, roots


def construct_half_rate_pattern(nc: NormalizedChannel, seeds) -> PeriodicPattern:
    """Build one density-1/2 periodic pattern from per-component seed phases.

    The interference graph decomposes into |l| chains (infinitely many
    six-cycles when l = 0) on which any half-density independent set must
    alternate; a chain's phase is 'I' (even walk positions transmit) or 'O'.
    Twin pairings tie the phases together, leaving g free components, one
    seed each.  Distinct seed vectors give distinct patterns.
    """
    sums = CycleSums.from_normalized(nc)
    verdict_ok = (sums.gamma1 < sums.gamma2
                  and sums.gamma1 < sums.gamma3
                  and sums.gamma1 < sums.gamma)
    if not verdict_ok:
        raise DomainError("channel does not admit half-rate patterns")
    m, dsu, roots = _phase_structure(nc, sums)
    assert dsu is not None, "achievable channel must have consistent pairings"
    g = sums.seed_count_exponent()
    assert len(roots) == g, "free components must match the gcd exponent"
    seeds = tuple(seeds)
    if len(seeds) != g or any(s not in ("I", "O") for s in seeds):
        raise DomainError(f"need {g} seeds drawn from {{'I','O'}}")

    root_phase = {r: (0 if s == "I" else 1) for r, s in zip(roots, seeds)}
    phase = []
    for i in range(m):
        r, par = dsu.find(i)
        phase.append(root_phase[r] ^ par)

    offs, _ = _walk_offsets(nc)

    def included(user: int, t: int) -> bool:
        q = _FIRST_POS[user]
        i = (t - offs[q]) % m
        return phase[i] == (q % 2)    # phase 0 = 'I' transmits at even positions

    # twin consistency: evaluating through the second walk position must agree
    for user in range(3):
        q2 = _SECOND_POS[user]
        for t in range(m):
            i2 = (t - offs[q2]) % m
            assert (phase[i2] == (q2 % 2)) == included(user, t), \
                "inconsistent twin propagation"

    slots = tuple(
        tuple(t for t in range(1, m + 1) if included(user, t)) for user in range(3)
    )
    pat = PeriodicPattern(K=3, period=m, slots=slots)
    assert all(len(s) * 2 == m for s in pat.slots), "density must be exactly 1/2"
    return pat


def enumerate_half_rate_patterns(nc: NormalizedChannel) -> list:
    """All 2^g half-rate patterns via seed enumeration."""
    sums = CycleSums.from_normalized(nc)
    g = sums.seed_count_exponent()
    out = []
    for combo in product("IO", repeat=g):
        out.append(construct_half_rate_pattern(nc, seeds=combo))
    return out


@dataclass(frozen=True)
class Claim1Report:
    consistent: bool
    odd_valuation: object | None
    violations: tuple


def _cyclic_index_tuples(K: int, max_len: int):
    """Adjacent-distinct cyclic index tuples up to length max_len.

    Tuples are closed walks on the complete user graph: consecutive indices
    differ, including around the wrap.  Vertex repetition is allowed (the
    six-link walk needs it); rotations are deduplicated, orientations kept.
    """
    seen = set()
    out = []
    for m in range(2, max_len + 1):
        for tup in product(range(K), repeat=m):
            ok = all(tup[a] != tup[(a + 1) % m] for a in range(m))
            if not ok:
                continue
            canon = min(tup[k:] + tup[:k] for k in range(m))
            if canon in seen:
                continue
            seen.add(canon)
            out.append(canon)
    return out


def claim1_check(nc: NormalizedChannel, max_len: int | None = None) -> Claim1Report:
    """Cycle-valuation criterion for IR = K/2, checked up to bounded length.

    Enumerates all cyclic edge tuples ((i1,i2),...,(im,i1)) with
    adjacent-distinct indices and m <= max_len (default 2K); the length of a
    cycle is the sum of its normalized cross-delays.  Consistent iff all
    odd-m cycle lengths share one 2-adic valuation strictly below every
    even-m cycle length's valuation.
    """
    if max_len is None:
        max_len = 2 * nc.K
    if max_len < 2:
        raise DomainError("max_len must be >= 2")
    lp = nc.lp
    odd_vals = {}
    even_vals = {}
    for tup in _cyclic_index_tuples(nc.K, max_len):
        m = len(tup)
        length = int(sum(lp[tup[a], tup[(a + 1) % m]] for a in range(m)))
        v = two_adic_valuation(length)
        bucket = odd_vals if m % 2 else even_vals
        bucket.setdefault(v, []).append((tup, length))

    violations = []
    consistent = True
    odd_valuation = min(odd_vals) if odd_vals else None
    if len(odd_vals) > 1:
        consistent = False
        for v, items in sorted(odd_vals.items(), key=lambda kv: (kv[0] is INF, kv[0])):
            if v != odd_valuation:
                tup, length = items[0]
                violations.append(("odd-valuation-differs", tup, length, v))
    if odd_valuation == INF:
        consistent = False
        tup, length = odd_vals[INF][0]
        violations.append(("odd-valuation-infinite", tup, length, INF))
    if consistent:
        for v, items in even_vals.items():
            if not odd_valuation < v:
                consistent = False
                tup, length = items[0]
                violations.append(("even-valuation-not-larger", tup, length, v))
    return Claim1Report(
        consistent=consistent,
        odd_valuation=odd_valuation,
        violations=tuple(violations),
    )


def scan_three_user(bound: int = 2, include_ir: bool = False,
                    include_claim1: bool = False, claim1_max_len: int = 6):
    """Exhaustive sweep over all lp in {-bound..bound}^6, K = 3.

    Yields one dict per channel with the cycle sums, the closed-form verdict
    and (optionally) the exact DP independence rate and the bounded cycle
    check, for cross-validation sweeps.
    """
    from . import dp    # local import: dp is a heavier dependency

    rng = range(-bound, bound + 1)
    for l21, l31, l12, l32, l13, l23 in product(rng, repeat=6):
        lp = np.array([[0, l12, l13], [l21, 0, l23], [l31, l32, 0]], dtype=np.int64)
        nc = NormalizedChannel.from_lp(lp)
        verdict = theorem3_check(nc, with_witness=False)
        row = {
            "lp": (l21, l31, l12, l32, l13, l23),
            "l": verdict.sums.l,
            "l1": verdict.sums.l1,
            "l2": verdict.sums.l2,
            "l3": verdict.sums.l3,
            "gamma": verdict.sums.gamma,
            "gamma1": verdict.sums.gamma1,
            "achievable": verdict.achievable,
            "pattern_count": verdict.pattern_count,
        }
        if include_ir:
            row["ir"] = dp.independence_rate(nc, want_cycle=False).value
        if include_claim1:
            row["claim1_consistent"] = claim1_check(nc, claim1_max_len).consistent
        yield row
