"""Fractional-programming lower bounds on the common and private rates.

For fixed beams the rate ``log(1 + gamma)`` is replaced by

    g = log(1 + theta) - theta + 2 sqrt(1 + theta) Re{phi^* s} - |phi|^2 D

where ``s`` is the received signal amplitude and ``D`` the total received
power (signal included). ``g`` is concave in the beams, never exceeds the
rate, and is tight at ``theta = gamma`` and the matching ``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, _as_matrix, link_terms, sinrs

__all__ = [
    "FpAuxiliaries",
    "update_theta",
    "update_phi",
    "update_aux",
    "surrogates",
    "g_common",
    "g_private",
    "f_common",
    "f_private",
]


@dataclass(frozen=True)
class FpAuxiliaries:
    theta_c: np.ndarray
    theta_p: np.ndarray
    phi_c: np.ndarray = None
    phi_p: np.ndarray = None

    def __post_init__(self):
        for name in ("theta_c", "theta_p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        K = self.theta_c.shape[0]
        for name in ("phi_c", "phi_p"):
            v = getattr(self, name)
            v = np.zeros(K, complex) if v is None else np.asarray(v, complex)
            object.__setattr__(self, name, v)

    @property
    def num_users(self) -> int:
        return self.theta_c.shape[0]


def _signals(A):
    K = A.shape[0]
    return A[:, 0], A[np.arange(K), np.arange(1, K + 1)]


def update_theta(ch: ChannelSet, bf) -> FpAuxiliaries:
    """Optimal SINR surrogates: ``theta = gamma``."""
    gc, gp = sinrs(ch, _as_matrix(bf))
    return FpAuxiliaries(gc, gp)


def update_phi(ch: ChannelSet, bf, theta: FpAuxiliaries) -> FpAuxiliaries:
    """Optimal quadratic-transform scalars for the given ``theta``."""
    A, Dc, Dp = link_terms(ch, _as_matrix(bf))
    sc, sp = _signals(A)
    phi_c = np.sqrt(1.0 + theta.theta_c) * sc / Dc
    phi_p = np.sqrt(1.0 + theta.theta_p) * sp / Dp
    return FpAuxiliaries(theta.theta_c, theta.theta_p, phi_c, phi_p)


def update_aux(ch: ChannelSet, bf) -> FpAuxiliaries:
    """Both closed-form block updates, theta first."""
    return update_phi(ch, bf, update_theta(ch, bf))


def _g(theta, phi, s, D):
    return (np.log1p(theta) - theta
            + 2.0 * np.sqrt(1.0 + theta) * np.real(np.conj(phi) * s)
            - np.abs(phi) ** 2 * D)


def surrogates(ch: ChannelSet, P: np.ndarray, aux: FpAuxiliaries):
    """Vectors ``(g_c, g_p)`` over all users for beam matrix ``P``."""
    A, Dc, Dp = link_terms(ch, P)
    sc, sp = _signals(A)
    return (_g(aux.theta_c, aux.phi_c, sc, Dc),
            _g(aux.theta_p, aux.phi_p, sp, Dp))


def g_common(ch: ChannelSet, bf, theta: float, phi: complex, k: int) -> float:
    A, Dc, _ = link_terms(ch, _as_matrix(bf))
    return float(_g(theta, phi, A[k, 0], Dc[k]))


def g_private(ch: ChannelSet, bf, theta: float, phi: complex, k: int) -> float:
    A, _, Dp = link_terms(ch, _as_matrix(bf))
    return float(_g(theta, phi, A[k, k + 1], Dp[k]))


def _f(theta, gamma):
    return np.log1p(theta) - theta + (1.0 + theta) * gamma / (1.0 + gamma)


def f_common(ch: ChannelSet, bf, theta: float, k: int) -> float:
    """Lagrangian-dual bound before the quadratic transform."""
    return float(_f(theta, sinrs(ch, _as_matrix(bf))[0][k]))


def f_private(ch: ChannelSet, bf, theta: float, k: int) -> float:
    return float(_f(theta, sinrs(ch, _as_matrix(bf))[1][k]))
