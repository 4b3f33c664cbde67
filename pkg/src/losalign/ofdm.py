"""Frequency-domain reconciliation: DFT blocks, precoders and ZF decoding.

With a cyclic prefix covering the largest delay, each integer link delay
becomes a diagonal phase-ramp matrix Z^l on the DFT grid, where
Z = diag(e^{-j 2 pi k / M}).  The forward DFT here uses the e^{-j} kernel;
that convention is what makes the alignment product T = Z^l and the derived
integer delay schedule come out as plain modular arithmetic.

All matrices of the 3-user construction are scalar multiples of powers of
Z, so exponents are tracked alongside the numeric matrices and every
numeric claim can be cross-checked against its closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelInstance
from .errors import DegenerateChannelError, DomainError, SizeError

DOF_COLUMN_CAP = 5000


def dft_matrix(M: int) -> np.ndarray:
    """Unitary DFT matrix F[k, m] = exp(-2j pi k m / M) / sqrt(M)."""
    k = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(k, k) / M) / math.sqrt(M)


def z_diag(M: int, exponent: int = 1) -> np.ndarray:
    """Diagonal of Z^exponent."""
    k = np.arange(M)
    return np.exp(-2j * np.pi * k * (exponent % M) / M)


def smallest_valid_prime(floor: int, l_values) -> int:
    """Smallest prime > floor that divides none of the given delays."""

    def is_prime(n):
        if n < 2:
            return False
        for d in range(2, int(math.isqrt(n)) + 1):
            if n % d == 0:
                return False
        return True

    m = max(2, floor + 1)
    vals = [int(v) for v in np.asarray(l_values).ravel() if int(v) != 0]
    while True:
        if is_prime(m) and all(v % m != 0 for v in vals):
            return m
        m += 1


@dataclass(frozen=True)
class PrecoderSet:
    """All matrices of the 3-user alignment construction for block length M.

    Diagonal matrices are stored as their M-vectors.  ``gamma_exp[j]`` is the
    Z-exponent of user j's encoding filter; it doubles as the integer delay
    d_j of the slot schedule.  ``pi_idx[c]`` is the DFT column carrying data
    symbol c, namely (l * c) mod M.
    """

    M: int
    n: int
    l: int
    d: tuple
    l_max: int
    f: np.ndarray               # M x M unitary DFT
    gains: np.ndarray           # 3 x 3 complex scalars h_ij e^{-j2pi fc tau}
    delays: np.ndarray          # 3 x 3 integer link delays
    h_diag: np.ndarray          # 3 x 3 x M link-matrix diagonals
    hbar_diag: np.ndarray       # normalized: Z^{l_ij}
    t_diag: np.ndarray          # alignment product diagonal, equals Z^l
    gamma_diag: np.ndarray      # 3 x M encoding filter diagonals
    gamma_exp: tuple
    v: np.ndarray               # M x n common basis, columns of F
    v_user: np.ndarray          # 3 x M x n per-user precoders
    pi_idx: tuple

    @property
    def cp_len(self) -> int:
        return self.l_max

    def t_closed_form_error(self) -> float:
        """Max elementwise gap between the alignment product and Z^l."""
        return float(np.abs(self.t_diag - z_diag(self.M, self.l)).max())


def alignment_step(ch: ChannelInstance) -> int:
    """The alternating cross-delay sum l that spaces consecutive symbols."""
    l = ch.l
    return int(l[0, 1] - l[1, 0] + l[1, 2] - l[2, 1] + l[2, 0] - l[0, 2])


def build_precoders(ch: ChannelInstance, M: int, strict: bool = True) -> PrecoderSet:
    """Construct the precoder family for a 3-user channel at block length M.

    Requires odd M exceeding every link delay; with ``strict`` the
    degenerate case l = 0 (mod M), where the alignment product collapses to
    identity and the basis loses rank, is rejected.
    """
    if ch.K != 3:
        raise DomainError("the precoder construction is for K = 3")
    if M % 2 == 0:
        raise DomainError("block length M must be odd")
    l_max = int(ch.l.max())
    if M <= l_max:
        raise DomainError(f"M = {M} must exceed the largest delay {l_max}")
    l = alignment_step(ch)
    if strict and l % M == 0:
        raise DegenerateChannelError(
            f"alternating delay sum {l} vanishes mod M = {M}; "
            "consecutive symbols would share a slot"
        )
    n = (M - 1) // 2
    ld = ch.l
    d1 = int(2 * ld[0, 1] - 2 * ld[1, 0] + 2 * ld[1, 2]
             - ld[2, 1] + ld[2, 0] - 2 * ld[0, 2]) % M
    d2 = l % M
    d3 = int(ld[0, 1] - ld[0, 2]) % M
    # same quantities via the encoding-filter exponents; they must agree
    g1 = int(-ld[2, 0] + ld[2, 1] + 2 * l)
    g3 = int(-ld[0, 2] + ld[0, 1])
    assert g1 % M == d1 and g3 % M == d3

    gains = ch.h * np.exp(-2j * np.pi * ch.phase_args())
    h_diag = np.empty((3, 3, M), dtype=complex)
    hbar_diag = np.empty((3, 3, M), dtype=complex)
    for i in range(3):
        for j in range(3):
            zl = z_diag(M, int(ld[i, j]))
            hbar_diag[i, j] = zl
            h_diag[i, j] = gains[i, j] * zl

    t_diag = (hbar_diag[0, 1] / hbar_diag[1, 0] * hbar_diag[1, 2]
              / hbar_diag[2, 1] * hbar_diag[2, 0] / hbar_diag[0, 2])
    gamma_exp = (g1 % M, l % M, g3 % M)
    gamma_diag = np.stack([z_diag(M, e) for e in gamma_exp])

    f = dft_matrix(M)
    pi_idx = tuple((l * c) % M for c in range(n))
    v = np.empty((M, n), dtype=complex)
    col = np.ones(M, dtype=complex) / math.sqrt(M)
    for c in range(n):
        v[:, c] = col
        col = col * t_diag
    v_user = np.stack([gamma_diag[j][:, np.newaxis] * v for j in range(3)])

    return PrecoderSet(
        M=M, n=n, l=l, d=(d1, d2, d3), l_max=l_max, f=f, gains=gains,
        delays=ld.copy(), h_diag=h_diag, hbar_diag=hbar_diag, t_diag=t_diag,
        gamma_diag=gamma_diag, gamma_exp=gamma_exp, v=v, v_user=v_user,
        pi_idx=pi_idx,
    )


@dataclass(frozen=True)
class PermutationCheck:
    ok: bool
    mapping: tuple | None
    max_residual: float
    first_failure: tuple | None    # (column, best_target, residual) or duplicate info


def permutation_check(ps: PrecoderSet, tol: float = 1e-9) -> PermutationCheck:
    """Match each basis column to a DFT column; injectivity is part of success.

    For prime M and nonzero step l the basis is an exact permuted subset of
    the DFT columns; otherwise repeats appear and the check reports the
    first column that collides or fails to match.
    """
    mapping = []
    used = set()
    max_res = 0.0
    for c in range(ps.n):
        diffs = np.linalg.norm(ps.f - ps.v[:, c][:, np.newaxis], axis=0)
        k = int(np.argmin(diffs))
        res = float(diffs[k])
        max_res = max(max_res, res)
        if res > tol:
            return PermutationCheck(False, None, max_res, (c, k, res))
        if k in used:
            return PermutationCheck(False, None, max_res, (c, k, res))
        used.add(k)
        mapping.append(k)
    return PermutationCheck(True, tuple(mapping), max_res, None)


@dataclass(frozen=True)
class SlotSchedule:
    """Integer-slot view of the encoding: where every symbol sits and lands."""

    M: int
    n: int
    l: int
    d: tuple
    cp_len: int
    tx_slots: tuple        # per user: slot of symbol k, (k l + d_j) mod M
    arrival_raw: tuple     # [rx][tx][k] tx slot + delay, before wrapping
    arrival_mod: tuple

    def to_json_dict(self) -> dict:
        return {
            "M": self.M,
            "n": self.n,
            "step": self.l,
            "delays": list(self.d),
            "cp_len": self.cp_len,
            "tx_slots": [list(s) for s in self.tx_slots],
            "arrivals": [
                [list(self.arrival_mod[i][j]) for j in range(3)] for i in range(3)
            ],
        }


def build_schedule(ps: PrecoderSet) -> SlotSchedule:
    """Slot maps: user j sends symbol k in slot (k l + d_j) mod M; the copy
    arriving at receiver i is shifted by the link delay l_ij."""
    tx = tuple(
        tuple((k * ps.l + ps.d[j]) % ps.M for k in range(ps.n)) for j in range(3)
    )
    raw = tuple(
        tuple(
            tuple(tx[j][k] + int(ps.delays[i, j]) for k in range(ps.n))
            for j in range(3)
        )
        for i in range(3)
    )
    mod = tuple(
        tuple(tuple(s % ps.M for s in raw[i][j]) for j in range(3)) for i in range(3)
    )
    return SlotSchedule(M=ps.M, n=ps.n, l=ps.l, d=ps.d, cp_len=ps.cp_len,
                        tx_slots=tx, arrival_raw=raw, arrival_mod=mod)


def data_indices(ps: PrecoderSet, rx: int, shift: int = 0) -> list:
    """DFT-column indices carrying rx's data after its direct link.

    Everything received is a scalar times a DFT column: symbol c of user j
    occupies column (l_rx,j + gamma_j + l c) mod M.  ``shift`` moves to a
    link-normalized frame.
    """
    base = int(ps.delays[rx, rx]) + ps.gamma_exp[rx] + shift
    return [(base + ps.l * c) % ps.M for c in range(ps.n)]


def interference_indices(ps: PrecoderSet, rx: int, shift: int = 0) -> list:
    """Sorted DFT-column indices hit by interference at receiver rx.

    The two interfering streams land one alignment step l apart, so when
    nothing degenerates their union covers exactly n+1 columns.
    """
    idx = set()
    for j in range(3):
        if j == rx:
            continue
        base = int(ps.delays[rx, j]) + ps.gamma_exp[j] + shift
        for c in range(ps.n):
            idx.add((base + ps.l * c) % ps.M)
    return sorted(idx)


def direct_delay_congruences(ps: PrecoderSet) -> tuple:
    """Expected direct delays (mod M) that make data and interference disjoint.

    The interference at rx occupies n+1 consecutive multiples of l starting
    at its aligned base; the data grid of n multiples misses it exactly when
    the direct delay takes the single residue that lands the data block on
    the remaining n columns.
    """
    out = []
    for rx in range(3):
        others = [j for j in range(3) if j != rx]
        bases = [int(ps.delays[rx, j]) + ps.gamma_exp[j] for j in others]
        # aligned interference spans base0 + l*c for c in [0, n+1); base0 is
        # whichever stream starts one step earlier
        if (bases[0] - bases[1]) % ps.M == ps.l % ps.M:
            base0 = bases[1]
        else:
            base0 = bases[0]
        required = (base0 + (ps.n + 1) * ps.l - ps.gamma_exp[rx]) % ps.M
        out.append(required)
    return tuple(out)


def orthogonality_check(ch: ChannelInstance, ps: PrecoderSet,
                        tol: float = 1e-9) -> bool:
    """True iff the data columns dodge the aligned interference at every rx.

    Decided by exact integer index arithmetic; when true, the verdict is
    re-verified numerically: the Gram blocks between the received data basis
    and every interference basis must vanish.
    """
    if ch.K != 3:
        raise DomainError("orthogonality check is for K = 3")
    if not np.array_equal(ch.l, ps.delays):
        raise DomainError("precoders were built for a different channel")
    for rx in range(3):
        if set(data_indices(ps, rx)) & set(interference_indices(ps, rx)):
            return False
    for rx in range(3):
        data_mat = ps.h_diag[rx, rx][:, np.newaxis] * ps.v_user[rx]
        blocks = [ps.h_diag[rx, j][:, np.newaxis] * ps.v_user[j]
                  for j in range(3) if j != rx]
        gram = np.abs(data_mat.conj().T @ np.hstack(blocks)).max()
        assert gram <= tol, f"index check passed but Gram block is {gram:.2e} at rx {rx}"
    return True


def transmit(ps: PrecoderSet, data: np.ndarray) -> np.ndarray:
    """Encode one block per user: precode, IDFT, prepend the cyclic prefix.

    ``data`` is (3, n) complex; returns (3, cp_len + M) time-domain signals.
    """
    data = np.asarray(data, dtype=complex)
    if data.shape != (3, ps.n):
        raise DomainError(f"data must be shaped (3, {ps.n})")
    out = np.zeros((3, ps.cp_len + ps.M), dtype=complex)
    for j in range(3):
        freq = ps.v_user[j] @ data[j]
        time = ps.f.conj().T @ freq
        out[j, : ps.cp_len] = time[ps.M - ps.cp_len:]
        out[j, ps.cp_len:] = time
    return out


def propagate(ch: ChannelInstance, ps: PrecoderSet, tx: np.ndarray) -> np.ndarray:
    """Noiseless superposition of delayed, scaled transmissions at each rx."""
    n_in = tx.shape[1]
    out = np.zeros((3, n_in + ps.l_max), dtype=complex)
    for i in range(3):
        for j in range(3):
            d = int(ch.l[i, j])
            out[i, d: d + n_in] += ps.gains[i, j] * tx[j]
    return out


@dataclass(frozen=True)
class ZfResult:
    ok: bool
    estimates: np.ndarray | None
    reason: str | None = None
    rank: int | None = None
    expected_rank: int | None = None


def zf_decode(ps: PrecoderSet, received: np.ndarray, rx: int) -> ZfResult:
    """Zero-forcing decode of one received block at receiver ``rx``.

    Strips the prefix, DFTs, normalizes by one cross link, projects onto the
    DFT columns free of interference and inverts the data map.  When the
    data and interference subspaces overlap the inversion is undefined and
    the rank deficiency is reported instead.
    """
    received = np.asarray(received, dtype=complex)
    if received.shape[0] < ps.cp_len + ps.M:
        raise DomainError("received block shorter than prefix plus data")
    y = ps.f @ received[ps.cp_len: ps.cp_len + ps.M]

    j0 = min(j for j in range(3) if j != rx)
    shift = -int(ps.delays[rx, j0])
    interf = interference_indices(ps, rx, shift=shift)
    data_idx = data_indices(ps, rx, shift=shift)
    overlap = set(interf) & set(data_idx)
    if len(interf) != ps.n + 1 or overlap:
        return ZfResult(
            ok=False, estimates=None,
            reason="data and interference subspaces are not orthogonal",
            rank=ps.n - len(overlap),
            expected_rank=ps.n,
        )
    comp = [k for k in range(ps.M) if k not in set(interf)]
    uc = ps.f[:, comp]
    h_inv = 1.0 / ps.h_diag[rx, j0]
    data_mat = (h_inv * ps.h_diag[rx, rx])[:, np.newaxis] * ps.v_user[rx]
    a = uc.conj().T @ data_mat
    rank = int(np.linalg.matrix_rank(a))
    if rank < ps.n:
        return ZfResult(ok=False, estimates=None,
                        reason="decoding matrix is rank deficient",
                        rank=rank, expected_rank=ps.n)
    est = np.linalg.solve(a, uc.conj().T @ (h_inv * y))
    return ZfResult(ok=True, estimates=est, rank=rank, expected_rank=ps.n)


def roundtrip(ch: ChannelInstance, ps: PrecoderSet, data: np.ndarray) -> list:
    """Encode, propagate and ZF-decode one block; one ZfResult per receiver."""
    rx_signals = propagate(ch, ps, transmit(ps, data))
    return [zf_decode(ps, rx_signals[i], i) for i in range(3)]


@dataclass(frozen=True)
class DofRankResult:
    K: int
    n: int
    l_taps: int
    M: int
    seed: int
    n_columns_total: int
    n_columns_used: int
    rank: int
    bound: int
    dof_ratio: float               # bound / total columns
    rank_ratio: float              # observed rank / used columns
    distinct_exponents: int | None = None


def _pair_list(K: int) -> list:
    """Index pairs (i, j), both in 2..K, i != j, (i, j) != (2, 3) (1-based)."""
    pairs = []
    for i in range(2, K + 1):
        for j in range(2, K + 1):
            if i != j and (i, j) != (2, 3):
                pairs.append((i, j))
    return pairs


def dof_rank_experiment(K: int, n: int, l_taps: int, M: int, seed: int,
                        single_path_delays: bool = False,
                        max_columns: int = DOF_COLUMN_CAP) -> DofRankResult:
    """Rank collapse of the general-K column family under multipath links.

    Each link matrix is a polynomial of degree l_taps - 1 in Z with random
    tap gains, so every column of the family is a bounded-degree polynomial
    in Z applied to the all-ones vector and the rank cannot exceed
    6 n (l_taps - 1) ((K-1)(K-2) - 1) + 1 however many columns are drawn.

    ``single_path_delays`` replaces each link by a pure phase ramp
    a_ij Z^{l_ij} with a random integer delay; every column then collapses
    to a power of Z times the ones vector and the rank equals the number of
    distinct exponents (the repeated-column degeneracy; the polynomial bound
    does not apply in this mode).
    """
    if K < 4:
        raise DomainError("the rank experiment needs K >= 4")
    if single_path_delays and l_taps != 1:
        raise DomainError("single-path mode requires l_taps = 1")
    pairs = _pair_list(K)
    P = len(pairs)
    assert P == (K - 1) * (K - 2) - 1
    bound = 6 * n * (l_taps - 1) * P + 1
    if not single_path_delays and M <= bound - 1:
        raise DomainError(f"M = {M} must exceed the degree bound {bound - 1}")
    total = n ** P
    if total > (1 << 62):
        raise SizeError("column index space too large", actual=total)

    rng = np.random.default_rng(seed)
    z = np.exp(-2j * np.pi * np.arange(M) / M)

    if single_path_delays:
        delays = rng.integers(0, M, size=(K + 1, K + 1))
        gains = rng.standard_normal((K + 1, K + 1)) \
            + 1j * rng.standard_normal((K + 1, K + 1))
        link_val = {(i, j): gains[i, j] * z ** delays[i, j]
                    for i in range(1, K + 1) for j in range(1, K + 1)}
        link_exp = {(i, j): int(delays[i, j])
                    for i in range(1, K + 1) for j in range(1, K + 1)}
    else:
        taps = rng.standard_normal((K + 1, K + 1, l_taps)) \
            + 1j * rng.standard_normal((K + 1, K + 1, l_taps))
        link_val = {}
        for i in range(1, K + 1):
            for j in range(1, K + 1):
                acc = np.zeros(M, dtype=complex)
                for t in range(l_taps):
                    acc += taps[i, j, t] * z ** t
                link_val[(i, j)] = acc
        link_exp = None

    base = np.ones(M, dtype=complex)
    ratio = np.empty((P, M), dtype=complex)
    exp_a = np.empty(P, dtype=np.int64)
    exp_b = np.empty(P, dtype=np.int64)
    for p, (i, j) in enumerate(pairs):
        a_val = link_val[(i, 1)] * link_val[(1, j)] * link_val[(2, 3)]
        b_val = link_val[(i, j)] * link_val[(1, 3)] * link_val[(2, 1)]
        assert np.abs(a_val).min() > 1e-12, "tap polynomial vanished on the grid"
        base = base * a_val ** n
        ratio[p] = b_val / a_val
        if link_exp is not None:
            exp_a[p] = link_exp[(i, 1)] + link_exp[(1, j)] + link_exp[(2, 3)]
            exp_b[p] = link_exp[(i, j)] + link_exp[(1, 3)] + link_exp[(2, 1)]

    if total <= max_columns:
        chosen = np.arange(total, dtype=np.int64)
    else:
        chosen = rng.choice(total, size=max_columns, replace=False)
    used = len(chosen)

    # decode flat indices into per-pair coefficients, big-endian in pairs
    alphas = np.empty((used, P), dtype=np.int64)
    rem = chosen.copy()
    for p in range(P - 1, -1, -1):
        alphas[:, p] = rem % n
        rem //= n

    pow_table = np.empty((P, n, M), dtype=complex)
    for p in range(P):
        pow_table[p, 0] = 1.0
        for e in range(1, n):
            pow_table[p, e] = pow_table[p, e - 1] * ratio[p]

    cols = np.empty((M, used), dtype=complex)
    for c in range(used):
        v = base.copy()
        for p in range(P):
            v = v * pow_table[p, alphas[c, p]]
        cols[:, c] = v / np.linalg.norm(v)

    sv = np.linalg.svd(cols, compute_uv=False)
    thresh = M * np.finfo(float).eps * sv[0]
    rank = int((sv > thresh).sum())

    distinct = None
    if link_exp is not None:
        exps = (alphas @ exp_b + (n - alphas) @ exp_a) % M
        distinct = int(len(np.unique(exps)))

    return DofRankResult(
        K=K, n=n, l_taps=l_taps, M=M, seed=seed,
        n_columns_total=total, n_columns_used=used,
        rank=rank, bound=bound,
        dof_ratio=bound / total,
        rank_ratio=rank / used,
        distinct_exponents=distinct,
    )


def export_matrix_csv(mat: np.ndarray, path: str):
    """Write a complex matrix as CSV with interleaved re/im columns."""
    import csv
    import os

    mat = np.asarray(mat)
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = []
        for c in range(mat.shape[1]):
            header += [f"re{c}", f"im{c}"]
        writer.writerow(header)
        for row in mat:
            flat = []
            for x in row:
                flat += [f"{x.real:.12g}", f"{x.imag:.12g}"]
            writer.writerow(flat)
    os.replace(tmp, path)
