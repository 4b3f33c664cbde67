"""Channel models: integer-delay links, delay quantization and normalization.

Conventions used throughout the package:

* ``l[i][j]`` is the integer delay (in symbol slots) from transmitter ``j``
  to receiver ``i``; ``h[i][j]`` the corresponding complex gain.  Users are
  0-based in code.
* A :class:`NormalizedChannel` carries the cross-delays after each
  transmitter has offset its stream by its own direct delay, so direct
  links are effectively delay zero.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def quantize_delays(taus, w_hz: float, t_d: float):
    """Quantize real path delays (seconds) to slot indices at bandwidth ``w_hz``.

    Returns ``(l, L)`` with ``l[i][j] = round(taus[i][j] * w_hz)`` and
    ``L = 1 + round(t_d * w_hz)``.  Rounding is half-up (3.5 -> 4) so results
    are identical across platforms.
    """
    taus = np.asarray(taus, dtype=float)
    if w_hz <= 0:
        raise DomainError("bandwidth must be positive")
    for idx, tau in np.ndenumerate(taus):
        if not (0.0 <= tau < t_d):
            raise DomainError(f"delay tau{idx} = {tau} outside [0, {t_d})")
    big_l = 1 + _round_half_up(t_d * w_hz)
    l = np.vectorize(_round_half_up, otypes=[np.int64])(taus * w_hz)
    assert l.min(initial=0) >= 0 and l.max(initial=0) <= big_l - 1
    return l, big_l


@dataclass(frozen=True)
class ChannelInstance:
    """A K-user single-path interference channel at the sampled-symbol level.

    ``f_c_tau`` holds the carrier-phase arguments f_c * tau[i][j] (cycles);
    they only matter to the OFDM front end and default to zero.
    """

    K: int
    L: int
    l: np.ndarray
    h: np.ndarray
    psd_over_n0: float = 1.0
    f_c_tau: np.ndarray | None = None

    def __post_init__(self):
        l = np.asarray(self.l, dtype=np.int64)
        h = np.asarray(self.h, dtype=np.complex128)
        if self.K < 1 or self.L < 1:
            raise DomainError("K and L must be >= 1")
        if l.shape != (self.K, self.K) or h.shape != (self.K, self.K):
            raise DomainError("l and h must be KxK")
        if l.min() < 0 or l.max() > self.L - 1:
            raise DomainError("delays must lie in {0,...,L-1}")
        if np.any(np.abs(h) == 0):
            raise DomainError("all link gains must be nonzero")
        if self.psd_over_n0 <= 0:
            raise DomainError("psd_over_n0 must be positive")
        fct = self.f_c_tau
        if fct is not None:
            fct = np.asarray(fct, dtype=float)
            if fct.shape != (self.K, self.K):
                raise DomainError("f_c_tau must be KxK")
            fct.setflags(write=False)
        l.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "f_c_tau", fct)

    def phase_args(self) -> np.ndarray:
        """Carrier-phase argument matrix, zeros when unspecified."""
        if self.f_c_tau is None:
            return np.zeros((self.K, self.K))
        return self.f_c_tau

    def to_json_dict(self) -> dict:
        d = {
            "K": self.K,
            "L": self.L,
            "delays": self.l.tolist(),
            "gains_re": self.h.real.tolist(),
            "gains_im": self.h.imag.tolist(),
            "psd_over_n0": self.psd_over_n0,
        }
        if self.f_c_tau is not None:
            d["f_c_tau"] = np.asarray(self.f_c_tau).tolist()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChannelInstance":
        try:
            h = np.asarray(d["gains_re"], dtype=float) + 1j * np.asarray(
                d["gains_im"], dtype=float
            )
            return cls(
                K=int(d["K"]),
                L=int(d["L"]),
                l=np.asarray(d["delays"], dtype=np.int64),
                h=h,
                psd_over_n0=float(d["psd_over_n0"]),
                f_c_tau=d.get("f_c_tau"),
            )
        except KeyError as exc:
            raise DomainError(f"channel spec missing field {exc}") from exc

    def to_json(self, path: str):
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
        os.replace(tmp, path)

    @classmethod
    def from_json(cls, path: str) -> "ChannelInstance":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def sample_channel(K: int, L: int, rng, psd_over_n0: float = 1.0,
                   unit_gains: bool = True) -> ChannelInstance:
    """Draw a random channel: delays i.i.d. uniform on {0,...,L-1}.

    Gains default to unit magnitude with uniform phase, which isolates the
    delay combinatorics; pass ``unit_gains=False`` for Rayleigh magnitudes.
    """
    rng = np.random.default_rng(rng)
    l = rng.integers(0, L, size=(K, K))
    phases = rng.uniform(0.0, 2 * np.pi, size=(K, K))
    if unit_gains:
        h = np.exp(1j * phases)
    else:
        mag = rng.rayleigh(scale=1.0, size=(K, K))
        mag[mag == 0] = 1.0
        h = mag * np.exp(1j * phases)
    return ChannelInstance(K=K, L=L, l=l, h=h, psd_over_n0=psd_over_n0)


@dataclass(frozen=True)
class NormalizedChannel:
    """Cross-delays after absorbing each transmitter's direct delay.

    ``lp[i][j] = l[i][j] - l[j][j]`` (zero diagonal) and ``r[i]`` is the
    per-symbol rate weight log2(1 + |h_ii|^2 * PSD/N0).
    """

    K: int
    lp: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.lp, dtype=np.int64)
        r = np.asarray(self.r, dtype=float)
        if lp.shape != (self.K, self.K):
            raise DomainError("lp must be KxK")
        if np.any(np.diag(lp) != 0):
            raise DomainError("normalized diagonal delays must be zero")
        if r.shape != (self.K,):
            raise DomainError("r must have K entries")
        lp.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "lp", lp)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_lp(cls, lp, r=None) -> "NormalizedChannel":
        lp = np.asarray(lp, dtype=np.int64)
        k = lp.shape[0]
        if r is None:
            r = np.ones(k)
        return cls(K=k, lp=lp, r=np.asarray(r, dtype=float))


def normalize(ch: ChannelInstance) -> NormalizedChannel:
    """Subtract each column's direct delay: lp[i][j] = l[i][j] - l[j][j]."""
    diag = np.diag(ch.l)
    lp = ch.l - diag[np.newaxis, :]
    r = np.log2(1.0 + np.abs(np.diag(ch.h)) ** 2 * ch.psd_over_n0)
    return NormalizedChannel(K=ch.K, lp=lp, r=r)


@dataclass(frozen=True)
class DPathChannel:
    """K-user channel in which every link consists of D physical paths."""

    K: int
    D: int
    L: int
    l: np.ndarray
    h: np.ndarray
    psd_over_n0: float = 1.0

    def __post_init__(self):
        if self.D < 1:
            raise DomainError("need at least one path per link")
        l = np.asarray(self.l, dtype=np.int64)
        h = np.asarray(self.h, dtype=np.complex128)
        shape = (self.K, self.K, self.D)
        if l.shape != shape or h.shape != shape:
            raise DomainError(f"l and h must have shape {shape}")
        if l.min() < 0 or l.max() > self.L - 1:
            raise DomainError("path delays must lie in {0,...,L-1}")
        if np.any(np.all(np.abs(h) == 0, axis=2)):
            raise DomainError("every link needs at least one nonzero path gain")
        l.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class DPathMapping:
    """Bookkeeping for the D-path -> DK-user reduction.

    Virtual user ``(j, d)`` has flat index ``j * D + d``.  For each real user
    ``j``, ``dstar[j]`` is the strongest direct path (ties to the lowest
    index) and ``data_virtual[j]`` the virtual user that carries its data;
    the remaining D-1 virtual copies act purely as interference.
    """

    K: int
    D: int
    dstar: tuple
    data_virtual: tuple

    def virtual_index(self, j: int, d: int) -> int:
        return j * self.D + d

    def real_rates(self, virtual_rates) -> np.ndarray:
        """Aggregate per-virtual-user rates back onto the K real users."""
        virtual_rates = np.asarray(virtual_rates, dtype=float)
        return np.array([virtual_rates[v] for v in self.data_virtual])


def expand_dpath(dch: DPathChannel):
    """Reinterpret a D-path channel as a DK-user single-path channel.

    The d-th virtual copy of user j reaches every receiver through the d-th
    physical path of the corresponding link, so the link from virtual
    transmitter (j, e) to virtual receiver (i, d) is path e of link (i, j).
    In particular virtual user (j, d) has direct link = path d of (j, j).
    Returns ``(instance, mapping)``.
    """
    K, D = dch.K, dch.D
    if np.any(np.abs(dch.h) == 0):
        raise DomainError("expansion requires all path gains nonzero")
    kk = K * D
    l = np.empty((kk, kk), dtype=np.int64)
    h = np.empty((kk, kk), dtype=np.complex128)
    for i in range(K):
        for d in range(D):
            for j in range(K):
                for e in range(D):
                    l[i * D + d, j * D + e] = dch.l[i, j, e]
                    h[i * D + d, j * D + e] = dch.h[i, j, e]
    dstar = []
    for j in range(K):
        mags = np.abs(dch.h[j, j, :]) ** 2
        dstar.append(int(np.argmax(mags)))  # argmax takes the lowest index on ties
    mapping = DPathMapping(
        K=K,
        D=D,
        dstar=tuple(dstar),
        data_virtual=tuple(j * D + dstar[j] for j in range(K)),
    )
    inst = ChannelInstance(K=kk, L=dch.L, l=l, h=h, psd_over_n0=dch.psd_over_n0)
    return inst, mapping
