"""Generalized-arithmetic-progression transmit schedules.

The achievability construction: form the set T of bounded-coefficient
integer combinations of the (unnormalized) cross delays in Z_L, interleave
A randomly offset copies into S, and transmit one symbol at every slot of S
in every block of length L.  Interference at receiver i then lands inside
the union of a few shifted copies of T, whose sumset closure keeps it small.

Subsets of Z_L are held as numpy bool arrays so all set algebra is
vectorized; L up to ~2^26 slots stays workable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelInstance
from .errors import DomainError, SizeError

L_SLOT_CAP = 1 << 26
_E = math.e


def _as_bitset(values, big_l: int) -> np.ndarray:
    bits = np.zeros(big_l, dtype=bool)
    bits[np.asarray(values, dtype=np.int64) % big_l] = True
    return bits


def bitset_values(bits: np.ndarray) -> np.ndarray:
    return np.flatnonzero(bits)


def _roll(bits: np.ndarray, shift: int) -> np.ndarray:
    """The set {x + shift mod L : x in bits}."""
    return np.roll(bits, shift % len(bits))


def cross_delays(ch: ChannelInstance) -> list:
    """The K(K-1) unnormalized cross delays, row-major without the diagonal."""
    return [int(ch.l[i, j]) for i in range(ch.K) for j in range(ch.K) if i != j]


def build_progression(ch: ChannelInstance, n_pairs: int | None = None,
                      coeff_max: int | None = None) -> np.ndarray:
    """The progression T: all sums of alpha_ij * l_ij mod L, 0 <= alpha < coeff_max.

    Accumulates one cross delay at a time so collisions collapse early and
    the N-tuple coefficient space is never materialized.  Returns a bool
    bitset over Z_L.
    """
    n = ch.K * (ch.K - 1)
    if n_pairs is not None and n_pairs != n:
        raise DomainError(f"n_pairs must equal K(K-1) = {n}")
    if coeff_max is None:
        coeff_max = n
    if coeff_max < 1:
        raise DomainError("coeff_max must be >= 1")
    big_l = ch.L
    if big_l > L_SLOT_CAP:
        raise SizeError("L exceeds the bitset slot cap; reduce K or epsilon",
                        limit=L_SLOT_CAP, actual=big_l)
    delays = cross_delays(ch)

    vals = np.zeros(1, dtype=np.int64)
    for d in delays:
        if len(vals) * coeff_max <= 4_000_000:
            steps = (np.arange(coeff_max, dtype=np.int64) * d) % big_l
            vals = np.unique((vals[:, None] + steps[None, :]).ravel() % big_l)
        else:
            # dense fallback: accumulate as a bitset union of rolled copies
            bits = _as_bitset(vals, big_l)
            acc = np.zeros(big_l, dtype=bool)
            for a in range(coeff_max):
                acc |= _roll(bits, a * d)
            vals = bitset_values(acc)
    return _as_bitset(vals, big_l)


def interleave(t_set: np.ndarray, offsets) -> np.ndarray:
    """S = union of m_a + T mod L over the offsets."""
    big_l = len(t_set)
    s = np.zeros(big_l, dtype=bool)
    for m in offsets:
        if not 0 <= int(m) < big_l:
            raise DomainError(f"offset {m} outside Z_{big_l}")
        s |= _roll(t_set, int(m))
    return s


@dataclass(frozen=True)
class GapSchedule:
    """One realized transmit schedule: progression, offsets and union."""

    K: int
    N: int
    epsilon: float
    L: int
    A: int
    offsets: tuple
    t_set: np.ndarray
    s_set: np.ndarray

    @property
    def t_size(self) -> int:
        return int(self.t_set.sum())

    @property
    def s_size(self) -> int:
        return int(self.s_set.sum())

    @property
    def density(self) -> float:
        return self.s_size / self.L

    @property
    def t_distinct(self) -> bool:
        """Whether all N^N coefficient combinations landed on distinct slots."""
        return self.t_size == self.N ** self.N

    @property
    def expected_density(self) -> float:
        """E|S|/L over offset draws, conditioned on this T: 1-(1-|T|/L)^A."""
        return 1.0 - (1.0 - self.t_size / self.L) ** self.A


def build_schedule(ch: ChannelInstance, epsilon: float, rng=None,
                   offsets=None, coeff_max: int | None = None) -> GapSchedule:
    """Assemble the full schedule with A = floor(L / N^(N+epsilon)) copies."""
    n = ch.K * (ch.K - 1)
    a_count = int(ch.L / n ** (n + epsilon))
    if a_count < 1:
        raise DomainError(
            f"L = {ch.L} too small: need at least N^(N+eps) = {n ** (n + epsilon):.3g}"
        )
    t_set = build_progression(ch, coeff_max=coeff_max)
    if offsets is None:
        rng = np.random.default_rng(rng)
        offsets = rng.integers(0, ch.L, size=a_count)
    offsets = tuple(int(m) for m in offsets)
    if len(offsets) != a_count:
        raise DomainError(f"need exactly A = {a_count} offsets")
    s_set = interleave(t_set, offsets)
    return GapSchedule(K=ch.K, N=n, epsilon=float(epsilon), L=ch.L,
                       A=a_count, offsets=offsets, t_set=t_set, s_set=s_set)


@dataclass(frozen=True)
class CleanSlotReport:
    """Per-user interference footprints and clean-slot fractions.

    ``f_frac[i]`` is |F_i|/L where F_i is the union of S shifted by the
    cross delays into receiver i; ``clean_frac[i]`` is the fraction of slots
    carrying user i's data and no interference.  The two analytic bounds are
    attached when the schedule parameters are known.
    """

    L: int
    f_sizes: tuple
    clean_counts: tuple
    f_frac: tuple
    clean_frac: tuple
    s_size: int
    union_bound: float | None = None      # A (N+1)^N / L
    asym_bound: float | None = None       # e * N^-epsilon
    t_distinct: bool | None = None


def interference_set(ch: ChannelInstance, s_set: np.ndarray, rx: int) -> np.ndarray:
    """F_rx: slots of one block that contain interference at receiver rx."""
    f = np.zeros(len(s_set), dtype=bool)
    for j in range(ch.K):
        if j == rx:
            continue
        f |= _roll(s_set, int(ch.l[rx, j]))
    return f


def clean_slots(ch: ChannelInstance, schedule) -> CleanSlotReport:
    """Count interference-free data slots per receiver for a schedule.

    ``schedule`` may be a GapSchedule or a raw bool bitset over Z_L (in
    which case the analytic bounds are omitted).
    """
    if isinstance(schedule, GapSchedule):
        s_set = schedule.s_set
        n = schedule.N
        union_bound = schedule.A * (n + 1) ** n / schedule.L
        asym_bound = _E * n ** (-schedule.epsilon)
        t_distinct = schedule.t_distinct
    else:
        s_set = np.asarray(schedule, dtype=bool)
        union_bound = asym_bound = t_distinct = None
    if len(s_set) != ch.L:
        raise DomainError("schedule bitset length must equal the channel's L")

    f_sizes = []
    clean_counts = []
    for i in range(ch.K):
        f = interference_set(ch, s_set, i)
        data = _roll(s_set, int(ch.l[i, i]))
        f_sizes.append(int(f.sum()))
        clean_counts.append(int((data & ~f).sum()))
    big_l = ch.L
    s_size = int(s_set.sum())
    return CleanSlotReport(
        L=big_l,
        f_sizes=tuple(f_sizes),
        clean_counts=tuple(clean_counts),
        f_frac=tuple(f / big_l for f in f_sizes),
        clean_frac=tuple(c / big_l for c in clean_counts),
        s_size=s_size,
        union_bound=union_bound,
        asym_bound=asym_bound,
        t_distinct=t_distinct,
    )


def averaged_clean_identity(ch: ChannelInstance, s_set: np.ndarray, rx: int):
    """Exact correlation identity: sum over all direct delays of the clean
    count equals |S| * (L - |F_rx|).

    Returns (lhs, rhs) so callers can assert integer equality; the left side
    is computed by brute force over all L direct-delay placements.
    """
    f = interference_set(ch, s_set, rx)
    not_f = ~f
    lhs = 0
    for d in range(ch.L):
        lhs += int((_roll(s_set, d) & not_f).sum())
    rhs = int(s_set.sum()) * (ch.L - int(f.sum()))
    return lhs, rhs


def theorem1_length(K: int, epsilon: float) -> int:
    """The bandwidth-driven block length ceil((2N)^(N+epsilon))."""
    n = K * (K - 1)
    return math.ceil((2 * n) ** (n + epsilon))


@dataclass(frozen=True)
class TrialRow:
    trial: int
    t_size: int
    s_size: int
    density: float
    expected_density: float
    mean_f_frac: float
    max_f_frac: float
    mean_clean_frac: float
    predicted_clean_frac: float   # density * (1 - mean_f_frac), the exact
                                  # expectation over the direct delays


@dataclass(frozen=True)
class MonteCarloReport:
    K: int
    N: int
    epsilon: float
    L: int
    A: int
    trials: int
    seed: int
    rows: tuple
    mean_clean: float
    stderr_clean: float
    ci95_clean: tuple
    mean_density: float
    analytic_target: float     # N^-eps (1 - e N^-eps)
    limit: float               # N^-eps

    def csv_rows(self) -> list:
        header = ["trial", "t_size", "s_size", "density", "expected_density",
                  "mean_f_frac", "max_f_frac", "mean_clean_frac",
                  "predicted_clean_frac"]
        out = [header]
        for r in self.rows:
            out.append([r.trial, r.t_size, r.s_size, f"{r.density:.9g}",
                        f"{r.expected_density:.9g}", f"{r.mean_f_frac:.9g}",
                        f"{r.max_f_frac:.9g}", f"{r.mean_clean_frac:.9g}",
                        f"{r.predicted_clean_frac:.9g}"])
        out.append(["summary", "", "", f"{self.mean_density:.9g}", "",
                    "", "", f"{self.mean_clean:.9g}", ""])
        return out


def monte_carlo_rate(K: int, epsilon: float, l_rule, trials: int,
                     seed: int) -> MonteCarloReport:
    """Estimate the expected clean-slot fraction over random channels.

    ``l_rule`` is {'kind': 'theorem1'} or {'kind': 'explicit', 'L': int}.
    Each trial draws fresh delays and offsets from a sub-generator seeded by
    (seed, trial), so trials are order-independent and reproducible.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    n = K * (K - 1)
    kind = l_rule.get("kind")
    if kind == "theorem1":
        big_l = theorem1_length(K, epsilon)
    elif kind == "explicit":
        big_l = int(l_rule["L"])
        if big_l < math.ceil(n ** (n + epsilon)):
            raise DomainError("explicit L smaller than N^(N+eps); A would be 0")
    else:
        raise DomainError("l_rule kind must be 'theorem1' or 'explicit'")
    if big_l > L_SLOT_CAP:
        raise SizeError("L exceeds the bitset slot cap; reduce K or epsilon",
                        limit=L_SLOT_CAP, actual=big_l)

    rows = []
    a_count = None
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        l = rng.integers(0, big_l, size=(K, K))
        ch = ChannelInstance(K=K, L=big_l, l=l, h=np.ones((K, K)))
        sched = build_schedule(ch, epsilon, rng=rng)
        a_count = sched.A
        rep = clean_slots(ch, sched)
        mean_f = float(np.mean(rep.f_frac))
        rows.append(TrialRow(
            trial=t,
            t_size=sched.t_size,
            s_size=sched.s_size,
            density=sched.density,
            expected_density=sched.expected_density,
            mean_f_frac=mean_f,
            max_f_frac=float(np.max(rep.f_frac)),
            mean_clean_frac=float(np.mean(rep.clean_frac)),
            predicted_clean_frac=sched.density * (1.0 - mean_f),
        ))

    clean = np.array([r.mean_clean_frac for r in rows])
    dens = np.array([r.density for r in rows])
    mean = float(clean.mean())
    stderr = float(clean.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    limit = n ** (-epsilon)
    return MonteCarloReport(
        K=K, N=n, epsilon=float(epsilon), L=big_l, A=int(a_count),
        trials=trials, seed=seed, rows=tuple(rows),
        mean_clean=mean, stderr_clean=stderr,
        ci95_clean=(mean - 1.96 * stderr, mean + 1.96 * stderr),
        mean_density=float(dens.mean()),
        analytic_target=limit * (1.0 - _E * limit),
        limit=limit,
    )
