"""Downlink 1-layer RSMA system model.

Channels, beamformers, SINRs, rates and transmit power. All rates are in
nats (natural logarithm); divide by ``log(2)`` for bits.

Conventions
-----------
* ``ChannelSet.channels`` is the ``(n, K)`` matrix ``H = [h_1, ..., h_K]``.
* A beamforming matrix is ``(n, K + 1)`` with the common beam in column 0
  and private beam ``p_k`` in column ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "BeamformingState",
    "RateVector",
    "gen_channel",
    "sinr_common",
    "sinr_private",
    "sinrs",
    "rates",
    "tx_power",
    "normalize_power",
    "clipped_allocation",
    "mmf_rate",
    "save_channel",
    "load_channel",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one downlink cell.

    With unit noise powers ``tx_power`` equals the transmit SNR.
    """

    num_users: int
    num_tx_antennas: int
    tx_power: float
    noise_powers: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.num_users < 1 or self.num_tx_antennas < 1:
            raise ValueError("num_users and num_tx_antennas must be >= 1")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")
        noise = (np.ones(self.num_users) if self.noise_powers is None
                 else self.noise_powers)
        noise = _frozen(noise, float)
        if noise.shape != (self.num_users,) or np.any(noise <= 0):
            raise ValueError("noise_powers must be K positive values")
        object.__setattr__(self, "noise_powers", noise)

    @classmethod
    def from_snr_db(cls, num_users, num_tx_antennas, snr_db):
        """Unit-noise configuration with ``tx_power = 10**(snr_db/10)``."""
        return cls(num_users, num_tx_antennas, 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrix plus per-user noise powers.

    ``error_covariances`` (``(K, n, n)``) turns every rate into the
    imperfect-CSIT lower bound where ``channels`` are the estimates.
    ``power_gram`` replaces the identity in ``tr(P^H M P)``; it is only set
    for the reduced (low-dimensional) problem.
    """

    channels: np.ndarray
    noise_powers: np.ndarray
    error_covariances: Optional[np.ndarray] = None
    power_gram: Optional[np.ndarray] = None

    def __post_init__(self):
        H = _frozen(self.channels, complex)
        if H.ndim == 1:
            H = _frozen(H[:, None], complex)
        if H.ndim != 2:
            raise ValueError("channels must be an (n, K) matrix")
        n, K = H.shape
        noise = _frozen(np.broadcast_to(self.noise_powers, (K,)), float)
        if np.any(noise <= 0):
            raise ValueError("noise powers must be positive")
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "noise_powers", noise)
        if self.error_covariances is not None:
            R = _frozen(self.error_covariances, complex)
            if R.shape != (K, n, n):
                raise ValueError(f"error_covariances must have shape {(K, n, n)}")
            object.__setattr__(self, "error_covariances", R)
            v = np.real(R[:, 0, 0]).copy()
            iso = v[:, None, None] * np.eye(n)
            object.__setattr__(self, "_error_scales", v if np.array_equal(R, iso) else None)
        else:
            object.__setattr__(self, "_error_scales", None)
        if self.power_gram is not None:
            M = _frozen(self.power_gram, complex)
            if M.shape != (n, n):
                raise ValueError(f"power_gram must have shape {(n, n)}")
            object.__setattr__(self, "power_gram", M)

    @property
    def num_users(self) -> int:
        return self.channels.shape[1]

    @property
    def dim(self) -> int:
        """Length of each beamforming vector."""
        return self.channels.shape[0]

    def channel(self, k: int) -> np.ndarray:
        return self.channels[:, k]

    @property
    def error_scales(self) -> Optional[np.ndarray]:
        """``v`` with ``R_k = v_k I`` when every error covariance is a scaled
        identity, else None."""
        return self._error_scales


@dataclass(frozen=True)
class BeamformingState:
    """Common beam, private beams, common-rate split ``c`` and epigraph ``t``."""

    common: np.ndarray
    private: np.ndarray
    c: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        pc = _frozen(self.common, complex).reshape(-1)
        Pp = _frozen(self.private, complex)
        if Pp.ndim == 1:
            Pp = Pp.reshape(-1, 1)
        if Pp.shape[0] != pc.shape[0]:
            raise ValueError("common and private beams differ in length")
        K = Pp.shape[1]
        c = np.zeros(K) if self.c is None else self.c
        c = _frozen(c, float).reshape(-1)
        if c.shape != (K,):
            raise ValueError("c must have one entry per user")
        object.__setattr__(self, "common", pc)
        object.__setattr__(self, "private", _frozen(Pp, complex))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_matrix(cls, P, c=None, t=0.0):
        P = np.asarray(P, dtype=complex)
        return cls(P[:, 0], P[:, 1:], c, t)

    @property
    def matrix(self) -> np.ndarray:
        """``(n, K + 1)`` matrix ``[p_c, p_1, ..., p_K]``."""
        return np.column_stack([self.common, self.private])

    @property
    def num_users(self) -> int:
        return self.private.shape[1]

    def replace(self, **changes) -> "BeamformingState":
        return replace(self, **changes)


@dataclass(frozen=True)
class RateVector:
    common_rates: np.ndarray
    private_rates: np.ndarray
    common_rate: float
    mmf_rate: float
    allocation: np.ndarray = field(default=None, repr=False)


def gen_channel(cfg: SystemConfig, seed: int) -> ChannelSet:
    """I.i.d. CN(0, 1) channel entries, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    shape = (cfg.num_tx_antennas, cfg.num_users)
    H = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return ChannelSet(H, cfg.noise_powers)


def _check(ch: ChannelSet, P: np.ndarray):
    if P.shape != (ch.dim, ch.num_users + 1):
        raise ValueError(
            f"beamformer shape {P.shape} does not match channel "
            f"({ch.dim} x {ch.num_users} users)")


def _error_quadratics(R, P, scales=None):
    """``E[k, j] = p_j^H R_k p_j``."""
    if scales is not None:
        return np.outer(scales, np.sum(P.real ** 2 + P.imag ** 2, axis=0))
    RP = np.einsum("kab,bj->kaj", R, P)
    return np.einsum("aj,kaj->kj", P.conj(), RP).real


def link_terms(ch: ChannelSet, P: np.ndarray):
    """Signal amplitudes and SINR denominators for every user.

    Returns ``(A, Dc, Dp)``: ``A = H^H P`` (``(K, K+1)``), ``Dc[k]`` the
    total received power seen when decoding the common stream (signal
    included) and ``Dp[k]`` the same after SIC removes the common stream.
    """
    A = ch.channels.conj().T @ P
    pw = A.real ** 2 + A.imag ** 2
    Dp = pw[:, 1:].sum(axis=1) + ch.noise_powers
    Dc = Dp + pw[:, 0]
    if ch.error_covariances is not None:
        E = _error_quadratics(ch.error_covariances, P, ch.error_scales)
        Dp = Dp + E[:, 1:].sum(axis=1)
        Dc = Dp + pw[:, 0] + E[:, 0]
    return A, Dc, Dp


def sinrs(ch: ChannelSet, P: np.ndarray):
    """Common and private SINRs of all users, each of length K."""
    P = np.asarray(P, dtype=complex)
    _check(ch, P)
    A, Dc, Dp = link_terms(ch, P)
    K = ch.num_users
    sc = np.abs(A[:, 0]) ** 2
    sp = np.abs(A[np.arange(K), np.arange(1, K + 1)]) ** 2
    return sc / (Dc - sc), sp / (Dp - sp)


def _as_matrix(bf):
    return bf.matrix if isinstance(bf, BeamformingState) else np.asarray(bf, complex)


def sinr_common(ch: ChannelSet, bf, k: int) -> float:
    return float(sinrs(ch, _as_matrix(bf))[0][k])


def sinr_private(ch: ChannelSet, bf, k: int) -> float:
    return float(sinrs(ch, _as_matrix(bf))[1][k])


def clipped_allocation(c: np.ndarray, common_rate: float) -> np.ndarray:
    """Clip ``c`` to be nonnegative, then shrink it into the common-rate pool."""
    c = np.maximum(np.asarray(c, dtype=float), 0.0)
    total = c.sum()
    if total > common_rate:
        c = c * (common_rate / total)
    return c


def rates(ch: ChannelSet, bf: BeamformingState) -> RateVector:
    """Per-user rates and the MMF rate of ``bf``.

    The MMF rate uses ``bf.c`` after :func:`clipped_allocation`, so it is
    well defined even when the split overdraws the common stream.
    """
    gc, gp = sinrs(ch, bf.matrix)
    rc = np.log1p(gc)
    rp = np.log1p(gp)
    Rc = float(rc.min())
    c = clipped_allocation(bf.c, Rc)
    return RateVector(rc, rp, Rc, float(np.min(rp + c)), c)


def mmf_rate(ch: ChannelSet, bf: BeamformingState) -> float:
    return rates(ch, bf).mmf_rate


def tx_power(bf, power_gram=None) -> float:
    """``tr(P^H P)`` (or ``tr(P^H M P)`` for a given Gram matrix ``M``)."""
    P = _as_matrix(bf)
    if power_gram is None:
        return float(np.real(np.vdot(P, P)))
    return float(np.real(np.vdot(P, power_gram @ P)))


def normalize_power(bf: BeamformingState, tx_power_budget: float,
                    power_gram=None) -> BeamformingState:
    """Scale all beams so that the transmit power equals the budget."""
    power = tx_power(bf, power_gram)
    if not power > 0 or not np.isfinite(power):
        raise FloatingPointError("cannot normalize a zero or non-finite beamformer")
    s = math.sqrt(tx_power_budget / power)
    return bf.replace(common=bf.common * s, private=bf.private * s)


def save_channel(path, ch: ChannelSet) -> None:
    """Write ``K N_t`` then one line per user of interleaved re/im values."""
    H = ch.channels
    n, K = H.shape
    with open(path, "w") as fh:
        fh.write(f"{K} {n}\n")
        for k in range(K):
            row = np.empty(2 * n)
            row[0::2] = H[:, k].real
            row[1::2] = H[:, k].imag
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_channel(path, noise_powers=1.0) -> ChannelSet:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("channel file header must be 'K N_t'")
        K, n = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (K, 2 * n):
        raise ValueError(f"expected {K} rows of {2 * n} values, got {data.shape}")
    H = (data[:, 0::2] + 1j * data[:, 1::2]).T
    return ChannelSet(H, noise_powers)
