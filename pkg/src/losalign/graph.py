"""Time-indexed interference graph, transmit patterns and the exact oracle.

Vertices are (user, slot) pairs with slots 1..T.  A directed edge runs from
v_j(t) to v_i(t + lp[i][j]) for every i != j whenever both endpoints lie in
the horizon: a transmission by user j in slot t lands at receiver i exactly
lp[i][j] slots later.  Feasibility of a transmit pattern ignores edge
direction, so conflicts are stored once as unordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import NormalizedChannel
from .errors import DomainError, SizeError

BRUTE_FORCE_VERTEX_CAP = 40


@dataclass(frozen=True)
class TransmitPattern:
    """Per-user sets of transmit slots inside a horizon of T slots."""

    K: int
    T: int
    slots: tuple

    def __post_init__(self):
        norm = []
        for j, user_slots in enumerate(self.slots):
            s = tuple(sorted(int(t) for t in user_slots))
            if len(set(s)) != len(s):
                raise DomainError(f"duplicate slots for user {j}")
            if s and (s[0] < 1 or s[-1] > self.T):
                raise DomainError(f"user {j} slots outside [1, {self.T}]")
            norm.append(s)
        if len(norm) != self.K:
            raise DomainError("need one slot set per user")
        object.__setattr__(self, "slots", tuple(norm))

    @property
    def counts(self) -> tuple:
        return tuple(len(s) for s in self.slots)

    @property
    def size(self) -> int:
        return sum(self.counts)

    def to_json_dict(self) -> dict:
        return {"slots": [list(s) for s in self.slots]}

    @classmethod
    def empty(cls, K: int, T: int) -> "TransmitPattern":
        return cls(K=K, T=T, slots=tuple(() for _ in range(K)))


@dataclass(frozen=True)
class PeriodicPattern:
    """A transmit pattern repeated with a fixed period.

    ``slots`` lists, per user, the active slots within one period (1-based,
    in [1, period]).  ``tile`` instantiates the pattern over n whole periods.
    """

    K: int
    period: int
    slots: tuple

    def __post_init__(self):
        norm = tuple(tuple(sorted(int(t) for t in s)) for s in self.slots)
        for s in norm:
            if s and (s[0] < 1 or s[-1] > self.period):
                raise DomainError(f"period slots outside [1, {self.period}]")
        object.__setattr__(self, "slots", norm)

    def tile(self, n_periods: int) -> TransmitPattern:
        T = self.period * n_periods
        tiled = []
        for s in self.slots:
            tiled.append(
                tuple(t + k * self.period for k in range(n_periods) for t in s)
            )
        return TransmitPattern(K=self.K, T=T, slots=tuple(tiled))

    def density(self) -> tuple:
        return tuple(len(s) / self.period for s in self.slots)

    def to_json_dict(self) -> dict:
        return {"period": self.period, "slots": [list(s) for s in self.slots]}


@dataclass(frozen=True)
class InterferenceGraph:
    """Directed interference graph over K users and T slots.

    ``conflicts`` holds the collapsed undirected conflict pairs as vertex-id
    tuples (id = user * T + slot - 1); ``directed_edges`` retains the full
    (i, j, t) edge list for rendering.
    """

    K: int
    T: int
    lp: np.ndarray
    conflicts: frozenset
    directed_edges: tuple

    def vid(self, user: int, slot: int) -> int:
        return user * self.T + (slot - 1)

    def vertex(self, vid: int) -> tuple:
        return vid // self.T, vid % self.T + 1

    @property
    def n_vertices(self) -> int:
        return self.K * self.T

    def adjacency_masks(self) -> list:
        """Per-vertex neighborhood bitmasks for the conflict relation."""
        adj = [0] * self.n_vertices
        for a, b in self.conflicts:
            adj[a] |= 1 << b
            adj[b] |= 1 << a
        return adj

    def has_edge(self, u: tuple, v: tuple) -> bool:
        a, b = self.vid(*u), self.vid(*v)
        return (min(a, b), max(a, b)) in self.conflicts

    def to_dot(self) -> str:
        lines = ["digraph interference {", "  rankdir=LR;"]
        for j in range(self.K):
            for t in range(1, self.T + 1):
                lines.append(f'  "u{j}t{t}" [label="v_{j + 1}({t})"];')
        for i, j, t in self.directed_edges:
            t2 = t + int(self.lp[i, j])
            lines.append(f'  "u{j}t{t}" -> "u{i}t{t2}" [label="e_{i + 1}{j + 1}({t})"];')
        lines.append("}")
        return "\n".join(lines)


def build_graph(nc: NormalizedChannel, T: int) -> InterferenceGraph:
    """Materialize the interference graph of horizon T for a channel."""
    if T < 1:
        raise DomainError("horizon T must be >= 1")
    K = nc.K
    conflicts = set()
    directed = []
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            d = int(nc.lp[i, j])
            for t in range(max(1, 1 - d), T + 1):
                t2 = t + d
                if not (1 <= t2 <= T):
                    continue
                directed.append((i, j, t))
                a = j * T + (t - 1)
                b = i * T + (t2 - 1)
                conflicts.add((min(a, b), max(a, b)))
    return InterferenceGraph(
        K=K,
        T=T,
        lp=nc.lp,
        conflicts=frozenset(conflicts),
        directed_edges=tuple(directed),
    )


def pattern_mask(p: TransmitPattern, g: InterferenceGraph) -> int:
    mask = 0
    for j, user_slots in enumerate(p.slots):
        for t in user_slots:
            mask |= 1 << g.vid(j, t)
    return mask


def mask_to_pattern(mask: int, g: InterferenceGraph) -> TransmitPattern:
    slots = [[] for _ in range(g.K)]
    v = mask
    while v:
        low = v & -v
        vid = low.bit_length() - 1
        user, slot = g.vertex(vid)
        slots[user].append(slot)
        v ^= low
    return TransmitPattern(K=g.K, T=g.T, slots=tuple(tuple(s) for s in slots))


def is_feasible(p: TransmitPattern, g: InterferenceGraph) -> bool:
    """True iff no conflict edge has both endpoints in the pattern."""
    if p.K != g.K or p.T != g.T:
        raise DomainError("pattern and graph dimensions disagree")
    mask = pattern_mask(p, g)
    for a, b in g.conflicts:
        if (mask >> a) & 1 and (mask >> b) & 1:
            return False
    return True


def max_weight_independent_set(adj: list, weights, order=None):
    """Exact max-weight independent set over bitmask adjacency lists.

    Branch and bound: branch on vertices in ``order`` (include first), prune
    when the undecided weight cannot beat the incumbent.  With strict
    improvement only, the first optimum found wins, which makes the returned
    set deterministic: among optima it prefers the one containing the
    earliest vertices in ``order``.
    """
    n = len(adj)
    if order is None:
        order = list(range(n))
    w = []
    for v in range(n):
        x = weights[v]
        w.append(int(x) if isinstance(x, (int, np.integer)) else float(x))

    best_mask = 0
    best_weight = None
    full = (1 << n) - 1

    def weight_of(mask: int):
        total = 0
        v = mask
        while v:
            low = v & -v
            total += w[low.bit_length() - 1]
            v ^= low
        return total

    # stack entries: (free_mask, chosen_mask, chosen_weight, rem_weight, order_idx)
    stack = [(full, 0, 0, weight_of(full), 0)]
    while stack:
        free, chosen, cw, rem, oi = stack.pop()
        if best_weight is not None and cw + rem <= best_weight:
            continue
        while oi < n and not (free >> order[oi]) & 1:
            oi += 1
        if oi >= n:
            if best_weight is None or cw > best_weight:
                best_weight = cw
                best_mask = chosen
            continue
        v = order[oi]
        bit = 1 << v
        # exclude branch pushed first so the include branch is explored first
        stack.append((free & ~bit, chosen, cw, rem - w[v], oi + 1))
        removed = free & (bit | adj[v])
        stack.append(
            (free & ~removed, chosen | bit, cw + w[v], rem - weight_of(removed), oi + 1)
        )
    return best_mask, best_weight if best_weight is not None else 0


@dataclass(frozen=True)
class BruteForceResult:
    pattern: TransmitPattern
    objective: float
    alpha: int | None


def brute_force_optimum(g: InterferenceGraph, r=None) -> BruteForceResult:
    """Exhaustive optimum of the weighted independent-set objective.

    Hard-capped at 40 vertices; larger instances must go through the dynamic
    program.  ``alpha`` is filled when all weights are equal, in which case
    the optimum cardinality equals the independence number.
    """
    n = g.n_vertices
    if n > BRUTE_FORCE_VERTEX_CAP:
        raise SizeError(
            f"{n} vertices exceeds the brute-force cap",
            limit=BRUTE_FORCE_VERTEX_CAP,
            actual=n,
        )
    if r is None:
        r = [1] * g.K
    weights = [r[vid // g.T] for vid in range(n)]
    adj = g.adjacency_masks()
    mask, obj = max_weight_independent_set(adj, weights)
    pattern = mask_to_pattern(mask, g)
    uniform = len(set(float(x) for x in r)) == 1
    alpha = pattern.size if uniform else None
    return BruteForceResult(pattern=pattern, objective=obj, alpha=alpha)


@dataclass(frozen=True)
class RateReport:
    """Rate accounting for a transmit pattern on a normalized channel."""

    counts: tuple
    per_user_bits: tuple
    objective: float
    per_slot_rate: float
    per_user_per_slot: tuple


def rate_report(p: TransmitPattern, nc: NormalizedChannel) -> RateReport:
    """Fill the rate report; feasibility is the caller's responsibility."""
    counts = p.counts
    bits = tuple(c * float(nc.r[j]) for j, c in enumerate(counts))
    objective = float(sum(bits))
    return RateReport(
        counts=counts,
        per_user_bits=bits,
        objective=objective,
        per_slot_rate=objective / p.T,
        per_user_per_slot=tuple(b / p.T for b in bits),
    )
