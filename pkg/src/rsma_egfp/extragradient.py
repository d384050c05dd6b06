"""Extragradient solver for the convex beamforming subproblem.

With the FP auxiliaries frozen, the subproblem

    max t  s.t.  t <= c_k + g_p,k,  sum(c) <= g_c,k,  c >= 0,  tr(P^H M P) <= P_t

is attacked through its Lagrangian saddle point. Primal and dual variables
are stacked into one real vector ``x = [y; z]`` with

    y = [Re p_c; Im p_c; Re p_1..p_K; Im p_1..p_K; c; t]
    z = [lambda; rho; mu; omega]

and the monotone map ``h(x) = [-dL/dy; dL/dz]`` is driven to a solution of
the associated variational inequality by projected extragradient steps with
a Khobotov step size. Only ``z`` is projected (onto the nonnegative orthant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fp import FpAuxiliaries, _g, _signals
from .model import BeamformingState, ChannelSet, _error_quadratics, clipped_allocation

__all__ = [
    "DualState",
    "EgConfig",
    "DivergenceError",
    "SubproblemResult",
    "VariationalProblem",
    "pack",
    "unpack",
    "lagrangian_value",
    "grad_primal",
    "grad_dual",
    "h_map",
    "project_dual",
    "khobotov_alpha",
    "extragradient_step",
    "eg_step",
    "adaptive_step",
    "solve_subproblem",
    "toy_minmax_demo",
    "initial_duals",
]


class DivergenceError(FloatingPointError):
    """Raised when an iterate becomes non-finite."""

    def __init__(self, iteration, message="non-finite iterate"):
        super().__init__(f"{message} at inner iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class DualState:
    lam: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    omega: float

    def __post_init__(self):
        for name in ("lam", "rho", "mu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        object.__setattr__(self, "omega", float(self.omega))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.lam, self.rho, self.mu, [self.omega]])

    @classmethod
    def from_vector(cls, z) -> "DualState":
        K = (len(z) - 1) // 3
        return cls(z[:K], z[K:2 * K], z[2 * K:3 * K], z[-1])


def initial_duals(num_users: int, tx_power_budget: float, common=True) -> DualState:
    """``lambda = rho = 1/K``, ``mu = 0``, ``omega = 1/P_t``."""
    K = num_users
    lam = np.full(K, 1.0 / K)
    rho = np.full(K, 1.0 / K) if common else np.zeros(K)
    return DualState(lam, rho, np.zeros(K), 1.0 / tx_power_budget)


@dataclass(frozen=True)
class EgConfig:
    alpha_init: float = 0.5
    beta: float = 0.8
    inner_tol: float = 1e-3
    max_inner_iters: int = 2000
    residual_tol: Optional[float] = 1e-3

    def __post_init__(self):
        if not self.alpha_init > 0:
            raise ValueError("alpha_init must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not self.inner_tol > 0 or self.max_inner_iters < 1:
            raise ValueError("inner_tol must be positive and max_inner_iters >= 1")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive or None")


def pack(bf: BeamformingState, dual: DualState) -> np.ndarray:
    """Stack ``(bf, dual)`` into the real vector ``x = [y; z]``."""
    Pp = bf.private.T.reshape(-1)
    return np.concatenate([
        bf.common.real, bf.common.imag, Pp.real, Pp.imag,
        bf.c, [bf.t], dual.vector(),
    ])


def _split(x, n, K):
    nK = n * K
    pc = x[:n] + 1j * x[n:2 * n]
    o = 2 * n
    Pp = (x[o:o + nK] + 1j * x[o + nK:o + 2 * nK]).reshape(K, n).T
    o += 2 * nK
    c = x[o:o + K]
    t = x[o + K]
    z = x[o + K + 1:]
    return pc, Pp, c, t, z


def unpack(x: np.ndarray, n: int, K: int):
    """Inverse of :func:`pack`; returns ``(bf, dual)``."""
    pc, Pp, c, t, z = _split(np.asarray(x, float), n, K)
    return BeamformingState(pc, Pp, c.copy(), t), DualState.from_vector(z)


def primal_size(n: int, K: int) -> int:
    return 2 * n * (K + 1) + K + 1


class VariationalProblem:
    """Lagrangian of one subproblem with frozen auxiliaries.

    ``common=False`` pins ``p_c``, ``c``, ``rho`` and ``mu`` at zero, which
    turns the problem into its SDMA special case.
    """

    def __init__(self, ch: ChannelSet, aux: FpAuxiliaries, tx_power_budget: float,
                 common: bool = True):
        self.ch = ch
        self.aux = aux
        self.budget = float(tx_power_budget)
        self.common = common
        self.n = ch.dim
        self.K = ch.num_users
        self.ny = primal_size(self.n, self.K)
        self.size = self.ny + 3 * self.K + 1
        self._sc = np.sqrt(1.0 + aux.theta_c)
        self._sp = np.sqrt(1.0 + aux.theta_p)
        self._phic2 = np.abs(aux.phi_c) ** 2
        self._phip2 = np.abs(aux.phi_p) ** 2
        self._const_c = np.log1p(aux.theta_c) - aux.theta_c
        self._const_p = np.log1p(aux.theta_p) - aux.theta_p
        self._phic_w = 2.0 * self._sc * aux.phi_c
        self._phip_w = 2.0 * self._sp * aux.phi_p
        self._rows = np.arange(self.K)
        self._cols = self._rows + 1
        self._H = ch.channels
        self._HH = np.ascontiguousarray(ch.channels.conj().T)
        self._noise = ch.noise_powers
        self._R = ch.error_covariances
        self._v = ch.error_scales
        self._M = ch.power_gram
        if not common:
            mask = np.ones(self.size)
            n, K = self.n, self.K
            mask[:2 * n] = 0.0
            o = 2 * n * (K + 1)
            mask[o:o + K] = 0.0
            mask[self.ny + K:self.ny + 3 * K] = 0.0
            self._mask = mask
        else:
            self._mask = None

    # evaluation helpers -------------------------------------------------
    def _power(self, P):
        MP = P if self._M is None else self._M @ P
        return float(np.real(np.vdot(P, MP))), MP

    def parts(self, x):
        n, K = self.n, self.K
        nK = n * K
        # rows of Pt are p_c, p_1, ..., p_K; P is its transpose view
        Pt = np.empty((K + 1, n), dtype=complex)
        Pt.real[0] = x[:n]
        Pt.imag[0] = x[n:2 * n]
        o = 2 * n
        Pt.real[1:] = x[o:o + nK].reshape(K, n)
        Pt.imag[1:] = x[o + nK:o + 2 * nK].reshape(K, n)
        o += 2 * nK
        z = x[o + K + 1:]
        return (Pt.T, x[o:o + K], x[o + K], z[:K], z[K:2 * K], z[2 * K:3 * K], z[-1])

    def _links(self, P):
        # same quantities as model.link_terms, with the cached H^H
        A = self._HH @ P
        pw = A.real ** 2 + A.imag ** 2
        Dp = pw[:, 1:].sum(axis=1) + self._noise
        Dc = Dp + pw[:, 0]
        if self._R is not None:
            E = _error_quadratics(self._R, P, self._v)
            Dp = Dp + E[:, 1:].sum(axis=1)
            Dc = Dp + pw[:, 0] + E[:, 0]
        return A, A[:, 0], A[self._rows, self._cols], Dc, Dp

    def surrogates(self, P):
        A, sc, sp, Dc, Dp = self._links(P)
        aux = self.aux
        return A, _g(aux.theta_c, aux.phi_c, sc, Dc), _g(aux.theta_p, aux.phi_p, sp, Dp)

    def value(self, x) -> float:
        P, c, t, lam, rho, mu, om = self.parts(x)
        _, gc, gp = self.surrogates(P)
        power, _ = self._power(P)
        return float(t - lam @ (t - c - gp) - rho @ (c.sum() - gc) + mu @ c
                     - om * (power - self.budget))

    def _wirtinger(self, P, c, t, lam, rho, mu, om, links):
        A, sc, sp, Dc, Dp = links
        # g = const + 2 sqrt(1 + theta) Re(phi^* s) - |phi|^2 D
        gc = self._const_c + (self._phic_w.conj() * sc).real - self._phic2 * Dc
        gp = self._const_p + (self._phip_w.conj() * sp).real - self._phip2 * Dp
        power, MP = self._power(P)
        wc = rho * self._phic2
        w = lam * self._phip2 + wc
        coef = A * -w[:, None]
        coef[:, 0] = 0.5 * rho * self._phic_w - wc * sc
        coef[self._rows, self._cols] += 0.5 * lam * self._phip_w
        G = self._H @ coef - om * MP
        R = self._R
        v = self._v
        if v is not None:
            G[:, 0] -= (wc @ v) * P[:, 0]
            G[:, 1:] -= (w @ v) * P[:, 1:]
        elif R is not None:
            G[:, 0] -= np.einsum("k,kab,b->a", wc, R, P[:, 0])
            G[:, 1:] -= np.einsum("k,kab,bj->aj", w, R, P[:, 1:])
        K = self.K
        dz = np.empty(3 * K + 1)
        dz[:K] = c + gp - t
        dz[K:2 * K] = gc - c.sum()
        dz[2 * K:3 * K] = c
        dz[-1] = self.budget - power
        return G, lam + mu - rho.sum(), 1.0 - lam.sum(), dz

    def wirtinger(self, x):
        """Conjugate Wirtinger gradient ``dL/dP^*`` as an ``(n, K+1)`` matrix,
        plus the real gradients in ``c``, ``t`` and ``z``."""
        P, *rest = self.parts(x)
        return self._wirtinger(P, *rest, self._links(P))

    def _stack(self, G, dc, dt, dz, sign=1.0):
        n, K, ny = self.n, self.K, self.ny
        g = np.empty(self.size)
        s2 = 2.0 * sign
        g[:n] = s2 * G[:, 0].real
        g[n:2 * n] = s2 * G[:, 0].imag
        Gp = G[:, 1:].T.reshape(-1)
        o = 2 * n
        nK = n * K
        g[o:o + nK] = s2 * Gp.real
        g[o + nK:o + 2 * nK] = s2 * Gp.imag
        o += 2 * nK
        g[o:o + K] = sign * dc
        g[o + K] = sign * dt
        g[ny:] = dz
        if self._mask is not None:
            g *= self._mask
        return g

    def gradient(self, x) -> np.ndarray:
        """Real gradient ``[dL/dy; dL/dz]`` (factor-2 Wirtinger convention)."""
        return self._stack(*self.wirtinger(x))

    def h(self, x) -> np.ndarray:
        return self._stack(*self.wirtinger(x), sign=-1.0)

    def h_and_mmf(self, x):
        """``h(x)`` and the clipped MMF rate from one channel evaluation."""
        P, c, t, lam, rho, mu, om = self.parts(x)
        links = self._links(P)
        hx = self._stack(*self._wirtinger(P, c, t, lam, rho, mu, om, links), sign=-1.0)
        return hx, self._mmf(c, links)

    def project(self, x) -> np.ndarray:
        x = x.copy()
        np.maximum(x[self.ny:], 0.0, out=x[self.ny:])
        return x

    def residual(self, x, hx=None) -> float:
        """Natural VI residual ``|x - Proj(x - h(x))|``; zero exactly at a saddle point."""
        if hx is None:
            hx = self.h(x)
        return float(np.linalg.norm(x - self.project(x - hx)))

    @staticmethod
    def _mmf(c, links):
        _, sc, sp, Dc, Dp = links
        sc2 = sc.real ** 2 + sc.imag ** 2
        sp2 = sp.real ** 2 + sp.imag ** 2
        rc = np.log1p(sc2 / (Dc - sc2))
        rp = np.log1p(sp2 / (Dp - sp2))
        Rc = float(rc.min())
        return float(np.min(rp + clipped_allocation(c, Rc)))

    def mmf(self, x) -> float:
        """Clipped MMF rate of the primal part of ``x``."""
        P, c, *_ = self.parts(x)
        return self._mmf(c, self._links(P))


def lagrangian_value(ch, bf, aux, dual, tx_power_budget, common=True) -> float:
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    return prob.value(pack(bf, dual))


def grad_primal(ch, bf, aux, dual, tx_power_budget, common=True) -> np.ndarray:
    """Real gradient of the Lagrangian in ``y``."""
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    return prob.gradient(pack(bf, dual))[:prob.ny]


def grad_dual(ch, bf, aux, dual, tx_power_budget, common=True) -> np.ndarray:
    """Gradient of the Lagrangian in ``z = [lambda; rho; mu; omega]``."""
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    return prob.gradient(pack(bf, dual))[prob.ny:]


def h_map(x, ch, aux, tx_power_budget, common=True) -> np.ndarray:
    return VariationalProblem(ch, aux, tx_power_budget, common).h(np.asarray(x, float))


def project_dual(z) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def _norm(v) -> float:
    return math.sqrt(v @ v)


def khobotov_alpha(x, x_bar, hx, hx_bar, alpha_init, beta) -> float:
    """``min(alpha_init, beta |x - x_bar| / |h(x) - h(x_bar)|)``.

    Returns ``alpha_init`` when the map does not change between the points.
    """
    dh = _norm(hx - hx_bar)
    if dh == 0.0:
        return float(alpha_init)
    return float(min(alpha_init, beta * _norm(x - x_bar) / dh))


def extragradient_step(x, alpha, h: Callable, project: Callable, hx=None):
    """One prediction/correction pair with a fixed step.

    Returns ``(x_next, x_bar)``.
    """
    if hx is None:
        hx = h(x)
    x_bar = project(x - alpha * hx)
    x_next = project(x - alpha * h(x_bar))
    return x_next, x_bar


def eg_step(x, alpha, ch, aux, tx_power_budget, common=True):
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    return extragradient_step(np.asarray(x, float), alpha, prob.h, prob.project)


def adaptive_step(x, hx, h, project, alpha_init, beta):
    """Prediction with ``alpha_init``, Khobotov step, then the final pair.

    Returns ``(x_next, x_bar, alpha)``.
    """
    x_bar = project(x - alpha_init * hx)
    h_bar = h(x_bar)
    alpha = khobotov_alpha(x, x_bar, hx, h_bar, alpha_init, beta)
    if alpha < alpha_init:
        x_bar = project(x - alpha * hx)
        h_bar = h(x_bar)
    return project(x - alpha * h_bar), x_bar, alpha


@dataclass
class SubproblemResult:
    bf: BeamformingState
    dual: DualState
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def solve_subproblem(ch: ChannelSet, bf_init: BeamformingState, aux: FpAuxiliaries,
                     dual_init: DualState, cfg: EgConfig, tx_power_budget: float,
                     common: bool = True) -> SubproblemResult:
    """Run extragradient iterations until the MMF rate settles.

    Stops when two consecutive clipped MMF rates differ by less than
    ``cfg.inner_tol`` and, unless ``cfg.residual_tol`` is None, the natural
    VI residual is below ``cfg.residual_tol``; or after
    ``cfg.max_inner_iters`` iterations. The trace holds
    ``(iteration, mmf_rate, alpha, |h(x)|)`` tuples.
    """
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    x = pack(bf_init, dual_init)
    hx, obj = prob.h_and_mmf(x)
    trace = [(0, obj, math.nan, _norm(hx))]
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_inner_iters + 1):
        x, _, alpha = adaptive_step(x, hx, prob.h, prob.project, cfg.alpha_init, cfg.beta)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(n_iter)
        hx, new_obj = prob.h_and_mmf(x)
        if not np.all(np.isfinite(hx)):
            raise DivergenceError(n_iter)
        trace.append((n_iter, new_obj, alpha, _norm(hx)))
        settled = abs(new_obj - obj) < cfg.inner_tol
        if settled and cfg.residual_tol is not None:
            settled = prob.residual(x, hx) < cfg.residual_tol
        if settled:
            obj = new_obj
            converged = True
            break
        obj = new_obj
    bf, dual = unpack(x, prob.n, prob.K)
    return SubproblemResult(bf, dual, n_iter, converged, trace)


def toy_minmax_demo(start=(1.0, 1.0), alpha=0.1, steps=100, mode="extragradient",
                    beta: Optional[float] = None) -> np.ndarray:
    """Trajectory of ``min_x max_y x*y`` from ``start``.

    ``mode="one-step"`` applies the prediction only. With ``beta`` set, the
    extragradient mode uses the Khobotov rule with ``alpha`` as the cap.
    Returns an array of shape ``(steps + 1, 2)``.
    """
    if mode not in ("one-step", "extragradient"):
        raise ValueError(f"unknown mode {mode!r}")

    def h(v):
        return np.array([v[1], -v[0]])

    def ident(v):
        return v

    traj = np.empty((steps + 1, 2))
    v = np.asarray(start, dtype=float)
    traj[0] = v
    for i in range(1, steps + 1):
        hv = h(v)
        if mode == "one-step":
            v = v - alpha * hv
        elif beta is None:
            v, _ = extragradient_step(v, alpha, h, ident, hx=hv)
        else:
            v, _, _ = adaptive_step(v, hv, h, ident, alpha, beta)
        traj[i] = v
    return traj
