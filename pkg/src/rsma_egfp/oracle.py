"""Independent checks for the solver.

Exact common-rate split, central finite differences, KKT residuals of the
convex subproblem, Monte-Carlo average rates and a brute-force two-user
power search. None of these share code paths with the quantities they
check beyond the basic rate formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .allocation import optimal_c_given_P
from .extragradient import DualState, VariationalProblem, pack
from .fp import FpAuxiliaries
from .model import BeamformingState, ChannelSet, _as_matrix, sinrs, tx_power

__all__ = [
    "optimal_c_given_P",
    "FdCheckResult",
    "fd_gradient_check",
    "KktResiduals",
    "kkt_residuals",
    "monte_carlo_rates",
    "monte_carlo_ar",
    "grid_search_2user",
]


@dataclass(frozen=True)
class FdCheckResult:
    passed: bool
    max_rel_error: float
    fd: np.ndarray
    analytic: np.ndarray


def fd_gradient_check(x, f: Callable, grad: Union[Callable, np.ndarray],
                      step: float = 1e-6, tolerance: float = 1e-5,
                      floor: float = 1e-8) -> FdCheckResult:
    """Compare ``grad`` with central differences of ``f`` at ``x``.

    Parameters
    ----------
    x : array_like
        Real point; every coordinate is perturbed by ``+-step``.
    f : callable
        Scalar function of a real vector.
    grad : callable or ndarray
        Analytic gradient, or a function returning it at ``x``.
    floor : float
        Lower bound on the relative-error denominator ``|grad_i|``.

    Returns
    -------
    FdCheckResult
        ``passed`` is True when every entry's relative error is below
        ``tolerance``.
    """
    x = np.array(x, dtype=float)
    g = np.asarray(grad(x) if callable(grad) else grad, dtype=float)
    fd = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fd[i] = (f(xp) - f(xm)) / (2.0 * step)
    err = np.abs(fd - g) / np.maximum(np.abs(g), floor)
    worst = float(err.max()) if err.size else 0.0
    return FdCheckResult(worst < tolerance, worst, fd, g)


@dataclass(frozen=True)
class KktResiduals:
    """First-order optimality residuals of the convex subproblem."""

    stationarity_norm: float
    primal_infeas: float
    dual_infeas: float
    compl_slack: float

    def max(self) -> float:
        return max(self.stationarity_norm, self.primal_infeas,
                   self.dual_infeas, self.compl_slack)


def kkt_residuals(ch: ChannelSet, bf: BeamformingState, aux: FpAuxiliaries,
                  dual: DualState, tx_power_budget: float,
                  common: bool = True) -> KktResiduals:
    """KKT residuals of ``max t`` subject to the surrogate rate constraints.

    Constraints: ``t <= c_k + g_p,k`` (lambda), ``sum(c) <= g_c,k`` (rho),
    ``c >= 0`` (mu) and ``tr(P^H P) <= P_t`` (omega). With
    ``common=False`` the common-stream constraints and ``c`` are dropped.
    """
    prob = VariationalProblem(ch, aux, tx_power_budget, common)
    x = pack(bf, dual)
    stat = float(np.linalg.norm(prob.gradient(x)[:prob.ny]))
    _, gc, gp = prob.surrogates(bf.matrix)
    c = bf.c if common else np.zeros(bf.num_users)
    power = tx_power(bf, ch.power_gram)
    slack_lam = bf.t - c - gp
    slack_pow = power - tx_power_budget
    viol = [slack_lam.max(), slack_pow]
    prods = [np.abs(dual.lam * slack_lam).max(), abs(dual.omega * slack_pow)]
    duals = [dual.lam, [dual.omega]]
    if common:
        slack_rho = c.sum() - gc
        viol += [slack_rho.max(), (-c).max()]
        prods += [np.abs(dual.rho * slack_rho).max(), np.abs(dual.mu * c).max()]
        duals += [dual.rho, dual.mu]
    zmin = min(float(np.min(d)) for d in duals)
    return KktResiduals(stat, max(0.0, float(max(viol))), max(0.0, -zmin),
                        float(max(prods)))


def _std_err(samples):
    return samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])


def _sqrtm_psd(R):
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.conj().T


def monte_carlo_rates(ics, bf, num_draws: int = 2000, seed: int = 0):
    """Average instantaneous rates over ``e_k ~ CN(0, R_k)``.

    ``ics`` needs ``estimates``, ``error_covariances`` and
    ``noise_powers``. Each user's errors come from its own seeded
    substream. Returns ``(rc, rp, se_c, se_p)``, each of length K.
    """
    P = _as_matrix(bf)
    H = np.asarray(ics.estimates)
    n, K = H.shape
    R = ics.error_covariances
    if R is None:
        gc, gp = sinrs(ChannelSet(H, ics.noise_powers), P)
        zeros = np.zeros(K)
        return np.log1p(gc), np.log1p(gp), zeros, zeros
    streams = np.random.SeedSequence(seed).spawn(K)
    rc = np.empty((num_draws, K))
    rp = np.empty((num_draws, K))
    for k in range(K):
        rng = np.random.default_rng(streams[k])
        w = (rng.standard_normal((num_draws, n))
             + 1j * rng.standard_normal((num_draws, n))) / math.sqrt(2.0)
        h = H[:, k] + w @ _sqrtm_psd(R[k]).T
        pw = np.abs(h.conj() @ P) ** 2
        interf = pw[:, 1:].sum(axis=1) + ics.noise_powers[k]
        rc[:, k] = np.log1p(pw[:, 0] / interf)
        rp[:, k] = np.log1p(pw[:, k + 1] / (interf - pw[:, k + 1]))
    return rc.mean(axis=0), rp.mean(axis=0), _std_err(rc), _std_err(rp)


def monte_carlo_ar(ics, bf, k: int, stream: str = "private", num_draws: int = 2000,
                   seed: int = 0):
    """Sample mean and standard error of user ``k``'s ``stream`` rate."""
    if stream not in ("common", "private"):
        raise ValueError("stream must be 'common' or 'private'")
    rc, rp, se_c, se_p = monte_carlo_rates(ics, bf, num_draws, seed)
    if stream == "common":
        return float(rc[k]), float(se_c[k])
    return float(rp[k]), float(se_p[k])


def _directions(H, kind):
    if kind == "mrt":
        D = H.copy()
    elif kind == "zf":
        D = np.linalg.pinv(H.conj().T)
    else:
        raise ValueError("directions must be 'mrt' or 'zf'")
    D = D / np.linalg.norm(D, axis=0)
    u = (H / np.linalg.norm(H, axis=0)).sum(axis=1)
    return np.column_stack([u / np.linalg.norm(u), D])


def grid_search_2user(ch: ChannelSet, tx_power_budget: float, directions: str = "mrt",
                      resolution: float = 0.01) -> float:
    """Best MMF rate over full-power splits with fixed beam directions.

    The common beam points along the sum of normalized channels, private
    beams along MRT or ZF directions. Every point of the simplex grid
    ``{(a_c, a_1, ..., a_K) : a_i in resolution * N, sum a = 1}`` is
    evaluated with the exact common-rate split. The result is achievable,
    hence a lower bound on the optimum.
    """
    K = ch.num_users
    if K > 2:
        raise ValueError("grid search is limited to K <= 2")
    m = int(round(1.0 / resolution))
    if m < 1 or not math.isclose(m * resolution, 1.0):
        raise ValueError("1 / resolution must be a positive integer")
    D = _directions(ch.channels, directions)
    gains = np.abs(ch.channels.conj().T @ D) ** 2  # (K, K+1)
    grid = np.stack(np.meshgrid(*[np.arange(m + 1)] * K, indexing="ij"), -1).reshape(-1, K)
    grid = grid[grid.sum(axis=1) <= m]
    frac = np.column_stack([m - grid.sum(axis=1), grid]) / m
    pw = frac[:, None, :] * gains[None] * tx_power_budget  # (pts, K, K+1)
    interf = pw[:, :, 1:].sum(axis=2) + ch.noise_powers
    idx = np.arange(K)
    sig = pw[:, idx, idx + 1]
    rc = np.log1p(pw[:, :, 0] / interf).min(axis=1)
    rp = np.log1p(sig / (interf - sig))
    if K == 1:
        mmf = rp[:, 0] + rc
    else:
        lo, hi = rp.min(axis=1), rp.max(axis=1)
        mmf = np.minimum(lo + rc, 0.5 * (lo + hi + rc))
    return float(mmf.max())
