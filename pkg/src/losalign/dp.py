"""Stationary dynamic program over the interference graph.

The state at time t collects the window bits v_j(t-k), k = 0..l_j*, that can
still interact with vertices at times >= t.  Feasible states are exactly the
independent sets of the window subgraph; transitions shift each user's window
by one slot, and the reward of entering a state is the weighted count of its
newest column.  Finite horizons are solved Viterbi-style; the asymptotic
per-slot optimum (the independence rate) is the maximum mean cycle of the
state-transition graph, which the stationarity/periodicity of the optimal
pattern reduces to exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import NormalizedChannel
from .errors import SizeError
from .graph import PeriodicPattern, TransmitPattern

STATE_BIT_CAP = 30
_NEG = np.float64(-np.inf)


def window_lengths(nc: NormalizedChannel) -> np.ndarray:
    """Per-user window length l_j*: the longest edge reaching user j backwards.

    l_j* = max(max_i lp[i][j], max_i -lp[j][i], 0); the floor at zero keeps
    windows well-formed when every edge leaving user j points forward.
    """
    lp = nc.lp
    l_star = np.maximum(lp.max(axis=0), (-lp).max(axis=1))
    return np.maximum(l_star, 0).astype(np.int64)


@dataclass(frozen=True)
class DpStateSpace:
    """Enumerated feasible DP states plus the shift-transition structure.

    State bit (j, k) sits at position ``offsets[j] + k`` and represents
    v_j(t - k); a state's integer mask is its stable serialized id.  ``pred``
    is a dense predecessor-index matrix padded with -1, rows sorted ascending
    so argmax-style tie breaking always picks the lowest state index.
    """

    K: int
    l_star: tuple
    offsets: tuple
    n_bits: int
    r: np.ndarray
    states: tuple
    index: dict
    new_col: np.ndarray      # (n_states, K) 0/1, newest column bits
    reward: np.ndarray       # (n_states,) new_col @ r
    pred: np.ndarray         # (n_states, max_pred) int32, -1 padded
    n_pred: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return int(self.n_pred.sum())

    def rewards_for(self, weights) -> np.ndarray:
        weights = np.asarray(weights, dtype=float)
        return self.new_col @ weights

    def successors(self, idx: int) -> list:
        """Indices of states reachable from ``idx`` in one shift."""
        a = self.states[idx]
        base = 0
        for j in range(self.K):
            width = self.l_star[j] + 1
            fmask = (1 << width) - 1
            fa = (a >> self.offsets[j]) & fmask
            base |= ((fa << 1) & fmask) << self.offsets[j]
        out = []
        for combo in range(1 << self.K):
            b = base
            for j in range(self.K):
                if (combo >> j) & 1:
                    b |= 1 << self.offsets[j]
            ib = self.index.get(b)
            if ib is not None:
                out.append(ib)
        return sorted(set(out))

    def transitions(self):
        for ia in range(self.n_states):
            for ib in self.successors(ia):
                yield ia, ib

    def stats(self) -> dict:
        return {
            "K": self.K,
            "window_lengths": list(self.l_star),
            "state_bits": self.n_bits,
            "n_states": self.n_states,
            "n_transitions": self.n_transitions,
        }


def _conflict_below_masks(nc: NormalizedChannel, l_star, offsets, n_bits):
    """For each bit position, the mask of lower positions it conflicts with.

    Window positions (j, k1) and (i, k2) conflict exactly when
    k1 - k2 = lp[i][j] for some ordered pair i != j, i.e. when the two
    vertices they denote are joined by an interference edge.
    """
    below = [0] * n_bits
    K = nc.K
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            d = int(nc.lp[i, j])
            for k1 in range(l_star[j] + 1):
                k2 = k1 - d
                if 0 <= k2 <= l_star[i]:
                    p = offsets[j] + k1
                    q = offsets[i] + k2
                    lo, hi = min(p, q), max(p, q)
                    below[hi] |= 1 << lo
    return below


def enumerate_states(nc: NormalizedChannel) -> DpStateSpace:
    """Enumerate all feasible window states and their shift transitions."""
    l_star = tuple(int(x) for x in window_lengths(nc))
    offsets = []
    acc = 0
    for j in range(nc.K):
        offsets.append(acc)
        acc += l_star[j] + 1
    offsets = tuple(offsets)
    n_bits = acc
    if n_bits > STATE_BIT_CAP:
        raise SizeError(
            f"state window needs {n_bits} bits (cap {STATE_BIT_CAP})",
            limit=STATE_BIT_CAP,
            actual=n_bits,
        )
    below = _conflict_below_masks(nc, l_star, offsets, n_bits)

    states = []

    def grow(pos: int, mask: int):
        if pos == n_bits:
            states.append(mask)
            return
        grow(pos + 1, mask)
        if mask & below[pos] == 0:
            grow(pos + 1, mask | (1 << pos))

    grow(0, 0)
    states.sort()
    index = {s: i for i, s in enumerate(states)}
    n = len(states)

    new_col = np.zeros((n, nc.K), dtype=np.int64)
    for i, s in enumerate(states):
        for j in range(nc.K):
            new_col[i, j] = (s >> offsets[j]) & 1
    reward = new_col @ np.asarray(nc.r, dtype=float)

    # Predecessors: a must hold b's window shifted one slot back; its oldest
    # bits are free, so each state has between 1 and 2^K predecessors.
    preds = []
    free_bits = [offsets[j] + l_star[j] for j in range(nc.K)]
    for b in states:
        base = 0
        for j in range(nc.K):
            width = l_star[j] + 1
            fmask = (1 << width) - 1
            fb = (b >> offsets[j]) & fmask
            base |= (fb >> 1) << offsets[j]
        row = []
        for combo in range(1 << nc.K):
            a = base
            for j in range(nc.K):
                if (combo >> j) & 1:
                    a |= 1 << free_bits[j]
            ia = index.get(a)
            if ia is not None:
                row.append(ia)
        row = sorted(set(row))
        assert row, "every feasible state has a feasible predecessor"
        preds.append(row)
    max_pred = max(len(p) for p in preds)
    pred = np.full((n, max_pred), -1, dtype=np.int32)
    n_pred = np.zeros(n, dtype=np.int32)
    for i, row in enumerate(preds):
        pred[i, : len(row)] = row
        n_pred[i] = len(row)

    return DpStateSpace(
        K=nc.K,
        l_star=l_star,
        offsets=offsets,
        n_bits=n_bits,
        r=np.asarray(nc.r, dtype=float),
        states=tuple(states),
        index=index,
        new_col=new_col,
        reward=np.asarray(reward, dtype=float),
        pred=pred,
        n_pred=n_pred,
    )


@dataclass(frozen=True)
class SolveResult:
    pattern: TransmitPattern
    objective: float
    trajectory: tuple     # state masks, one per slot 1..T
    boundary: str
    period: int | None = None


def _relax(prev: np.ndarray, ss: DpStateSpace, reward: np.ndarray):
    """One Viterbi step: best predecessor value per state plus its reward."""
    padded = np.append(prev, _NEG)
    cand = padded[ss.pred]     # -1 rows pick the -inf pad
    choice = np.argmax(cand, axis=1)
    value = cand[np.arange(ss.n_states), choice] + reward
    back = ss.pred[np.arange(ss.n_states), choice]
    return value, back


def solve_finite(nc: NormalizedChannel, T: int, boundary: str = "exact",
                 weights=None, state_space: DpStateSpace | None = None,
                 detect_period: bool = False) -> SolveResult:
    """Maximize the weighted independent-set objective over horizon T.

    ``boundary='exact'`` forces the initial window to an empty history
    (bits referring to slots < 1 are zero), which makes the result equal to
    the brute-force optimum.  ``boundary='paper'`` starts every state at
    cost zero, the relaxed initialization of the plain algorithm.
    """
    if boundary not in ("exact", "paper"):
        raise ValueError("boundary must be 'exact' or 'paper'")
    if T < 1:
        raise ValueError("T must be >= 1")
    ss = state_space if state_space is not None else enumerate_states(nc)
    reward = ss.reward if weights is None else ss.rewards_for(weights)

    n = ss.n_states
    states_arr = np.asarray(ss.states, dtype=np.int64)
    if boundary == "exact":
        newcol_mask = 0
        for j in range(ss.K):
            newcol_mask |= 1 << ss.offsets[j]
        history_free = (states_arr & ~np.int64(newcol_mask)) == 0
        value = np.where(history_free, reward, _NEG)
    else:
        value = reward.copy()

    backs = [np.full(n, -1, dtype=np.int32)]
    for _ in range(2, T + 1):
        value, back = _relax(value, ss, reward)
        backs.append(back)

    best = int(np.argmax(value))
    objective = float(value[best])
    traj_idx = [best]
    for t in range(T - 1, 0, -1):
        best = int(backs[t][best])
        traj_idx.append(best)
    traj_idx.reverse()

    slots = [[] for _ in range(ss.K)]
    for t, idx in enumerate(traj_idx, start=1):
        s = ss.states[idx]
        for j in range(ss.K):
            if (s >> ss.offsets[j]) & 1:
                slots[j].append(t)
    pattern = TransmitPattern(K=ss.K, T=T, slots=tuple(tuple(s) for s in slots))

    period = None
    if detect_period:
        masks = [ss.states[i] for i in traj_idx]
        lo, hi = T // 3, max(T // 3 + 1, 2 * T // 3)
        for p in range(1, hi - lo):
            if all(masks[t] == masks[t + p] for t in range(lo, hi - p)):
                period = p
                break

    return SolveResult(
        pattern=pattern,
        objective=objective,
        trajectory=tuple(ss.states[i] for i in traj_idx),
        boundary=boundary,
        period=period,
    )


@dataclass(frozen=True)
class IRResult:
    value: object            # Fraction for uniform weights, float otherwise
    n_states: int
    cycle: tuple             # state masks along one optimal cycle
    pattern: PeriodicPattern | None

    @property
    def value_float(self) -> float:
        return float(self.value)


def independence_rate(nc: NormalizedChannel, weights: str = "uniform",
                      state_space: DpStateSpace | None = None,
                      want_cycle: bool = True) -> IRResult:
    """Asymptotic optimum per slot: max mean cycle of the transition graph.

    With uniform weights the rewards are integers and the result is returned
    as an exact Fraction (the mean of some cycle of at most n_states edges,
    so its reduced denominator is bounded by n_states; the float Karp value
    is therefore exactly recoverable).  With weights='r' the channel's rate
    weights are used and a float is returned.
    """
    ss = state_space if state_space is not None else enumerate_states(nc)
    if weights == "uniform":
        reward = ss.new_col.sum(axis=1).astype(float)
    elif weights == "r":
        reward = ss.reward.copy()
    else:
        raise ValueError("weights must be 'uniform' or 'r'")

    n = ss.n_states
    assert ss.states[0] == 0, "all-zero state must exist"
    D = np.full((n + 1, n), _NEG)
    D[0, 0] = 0.0
    for k in range(1, n + 1):
        D[k], _ = _relax(D[k - 1], ss, reward)
    assert np.all(np.isfinite(D[n])), "transition graph must be strongly connected"

    with np.errstate(invalid="ignore"):
        numer = D[n][np.newaxis, :] - D[:n, :]
    denom = (n - np.arange(n, dtype=float))[:, np.newaxis]
    ratios = numer / denom      # unreachable D[k] gives +inf, never the min
    mmc = float(np.min(ratios, axis=0).max())

    if weights == "uniform":
        value = Fraction(mmc).limit_denominator(n)
        assert abs(float(value) - mmc) < 1e-9
    else:
        value = mmc

    cycle_masks: tuple = ()
    pattern = None
    if want_cycle:
        idx_cycle = _extract_critical_cycle(ss, reward, value)
        cycle_masks = tuple(ss.states[i] for i in idx_cycle)
        slots = [[] for _ in range(ss.K)]
        for t, i in enumerate(idx_cycle, start=1):
            s = ss.states[i]
            for j in range(ss.K):
                if (s >> ss.offsets[j]) & 1:
                    slots[j].append(t)
        pattern = PeriodicPattern(
            K=ss.K, period=len(idx_cycle), slots=tuple(tuple(s) for s in slots)
        )
        total = sum(float(reward[i]) for i in idx_cycle)
        assert abs(total - float(value) * len(idx_cycle)) < 1e-6

    return IRResult(value=value, n_states=n, cycle=cycle_masks, pattern=pattern)


def _extract_critical_cycle(ss: DpStateSpace, reward: np.ndarray, value):
    """Find one cycle whose mean reward equals the max mean ``value``.

    Shifts every reward by -value (integer arithmetic when value is a
    Fraction over integer rewards), computes converged longest-walk
    potentials, and searches the tight subgraph, which contains exactly the
    cycles of maximal mean.
    """
    n = ss.n_states
    exact = isinstance(value, Fraction)
    if exact:
        q, p = value.denominator, value.numerator
        rr = (np.asarray(reward, dtype=np.int64) * q) - p
        pot = np.zeros(n, dtype=np.int64)
        pad = np.int64(-(1 << 50))
    else:
        rr = reward - value
        pot = np.zeros(n, dtype=float)
        pad = _NEG
    for _ in range(n):
        padded = np.append(pot, pad)
        step = padded[ss.pred].max(axis=1) + rr
        pot = np.maximum(pot, step)

    def is_tight(ia, ib):
        lhs = pot[ia] + rr[ib]
        if exact:
            return lhs == pot[ib]
        return abs(float(lhs - pot[ib])) <= 1e-9

    tight = [[ib for ib in ss.successors(ia) if is_tight(ia, ib)] for ia in range(n)]

    color = [0] * n       # 0 new, 1 on stack, 2 done
    for start in range(n):
        if color[start] != 0:
            continue
        stack = [(start, iter(tight[start]))]
        color[start] = 1
        path = [start]
        pos_in_path = {start: 0}
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == 1:
                    cycle = path[pos_in_path[nxt]:]
                    k = cycle.index(min(cycle))
                    return cycle[k:] + cycle[:k]
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(tight[nxt])))
                    path.append(nxt)
                    pos_in_path[nxt] = len(path) - 1
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
                pos_in_path.pop(path.pop(), None)
    raise AssertionError("tight subgraph must contain a critical cycle")
