"""Imperfect CSIT: estimated channels, rate lower bounds and the robust solvers.

The transmitter knows ``h_hat = h - e`` and the error covariances ``R_k``.
Treating the error terms as independent Gaussian noise gives the lower
bound SINRs used here; they are evaluated by the ordinary rate code on a
:class:`ChannelSet` carrying ``error_covariances``, so the whole EG-FP
pipeline carries over unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .allocation import max_min_value
from .egfp import EgfpConfig, SolverReport, solve
from .model import ChannelSet, SystemConfig, _as_matrix, _frozen, sinrs
from .oracle import monte_carlo_rates

__all__ = [
    "ImperfectChannelSet",
    "gen_imperfect_channel",
    "draw_errors",
    "rate_lb_common",
    "rate_lb_private",
    "average_rates",
    "egfp_solve_imperfect",
    "sdma_solve",
]


def _cn(rng, shape, variance):
    """Circularly-symmetric complex Gaussian samples with per-column variance."""
    scale = np.sqrt(np.asarray(variance, float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ImperfectChannelSet:
    """Channel estimates, estimation errors and the isotropic error model.

    Columns of ``estimates`` and ``errors`` are users. The true channels are
    ``estimates + errors`` and ``R_k = kappa * path_variances[k] * I``.
    """

    estimates: np.ndarray
    errors: np.ndarray
    path_variances: np.ndarray
    kappa: float
    noise_powers: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")
        H = _frozen(self.estimates, complex)
        E = _frozen(self.errors, complex)
        if H.ndim != 2 or E.shape != H.shape:
            raise ValueError("estimates and errors must be (n, K) matrices of equal shape")
        K = H.shape[1]
        var = _frozen(self.path_variances, float)
        if var.shape != (K,) or np.any(var <= 0):
            raise ValueError("path_variances must be K positive values")
        object.__setattr__(self, "estimates", H)
        object.__setattr__(self, "errors", E)
        object.__setattr__(self, "path_variances", var)
        object.__setattr__(self, "noise_powers",
                           _frozen(np.broadcast_to(self.noise_powers, (K,)), float))

    @property
    def num_users(self) -> int:
        return self.estimates.shape[1]

    @property
    def num_tx_antennas(self) -> int:
        return self.estimates.shape[0]

    @property
    def true_channels(self) -> np.ndarray:
        return self.estimates + self.errors

    @property
    def error_variances(self) -> np.ndarray:
        return self.kappa * self.path_variances

    @cached_property
    def error_covariances(self) -> Optional[np.ndarray]:
        """``(K, n, n)`` stack of ``R_k``, or None when ``kappa = 0``."""
        if self.kappa == 0.0:
            return None
        eye = np.eye(self.num_tx_antennas)
        return self.error_variances[:, None, None] * eye

    @cached_property
    def nominal(self) -> ChannelSet:
        """Estimated channels with the error covariances attached.

        Every rate computed on it is the lower bound.
        """
        return ChannelSet(self.estimates, self.noise_powers, self.error_covariances)

    def with_kappa(self, kappa: float) -> "ImperfectChannelSet":
        """Same estimates, errors rescaled to the new error ratio."""
        if self.kappa == 0.0:
            errors = self.errors
        else:
            errors = self.errors * math.sqrt(kappa / self.kappa)
        return ImperfectChannelSet(self.estimates, errors, self.path_variances,
                                   kappa, self.noise_powers)


def gen_imperfect_channel(cfg: SystemConfig, kappa: float, seed: int) -> ImperfectChannelSet:
    """Draw ``sigma_k^2 ~ U[0.1, 1]``, ``h_hat ~ CN(0, (1-kappa) sigma^2 I)``
    and ``e ~ CN(0, kappa sigma^2 I)``."""
    if not 0.0 <= kappa < 1.0:
        raise ValueError("kappa must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    K, n = cfg.num_users, cfg.num_tx_antennas
    var = rng.uniform(0.1, 1.0, K)
    H = _cn(rng, (n, K), (1.0 - kappa) * var)
    if kappa == 0.0:
        E = np.zeros((n, K), complex)
    else:
        E = _cn(rng, (n, K), kappa * var)
    return ImperfectChannelSet(H, E, var, kappa, cfg.noise_powers)


def draw_errors(ics: ImperfectChannelSet, num_draws: int, rng) -> np.ndarray:
    """``(num_draws, n, K)`` fresh error samples from the isotropic model."""
    rng = np.random.default_rng(rng)
    shape = (num_draws, ics.num_tx_antennas, ics.num_users)
    return _cn(rng, shape, ics.error_variances)


def rate_lb_common(ics: ImperfectChannelSet, bf, k: int) -> float:
    """Lower bound on the average common rate of user ``k``."""
    return float(np.log1p(sinrs(ics.nominal, _as_matrix(bf))[0][k]))


def rate_lb_private(ics: ImperfectChannelSet, bf, k: int) -> float:
    """Lower bound on the average private rate of user ``k``."""
    return float(np.log1p(sinrs(ics.nominal, _as_matrix(bf))[1][k]))


def average_rates(ics: ImperfectChannelSet, bf, num_draws: int = 2000, seed: int = 0):
    """Monte-Carlo average rates over the error distribution.

    Returns ``(rc, rp, se_c, se_p)``: per-user means of the instantaneous
    common and private rates at ``h = h_hat + e`` and their standard errors.
    """
    return monte_carlo_rates(ics, bf, num_draws, seed)


def egfp_solve_imperfect(ics: ImperfectChannelSet, tx_power_budget: float,
                         cfg: EgfpConfig = None, seed: Optional[int] = None,
                         common: bool = True, mc_draws: int = 0) -> SolverReport:
    """Maximize the worst lower-bound rate with EG-FP.

    The report's ``mmf_rate`` is the lower-bound objective. With
    ``mc_draws > 0``, ``extras["mmf_rate_mc"]`` also holds the MMF rate of
    the Monte-Carlo average rates at the solution (same ``c`` re-split).
    """
    report = solve(ics.nominal, tx_power_budget, cfg or EgfpConfig(), seed, common)
    report.extras["kappa"] = ics.kappa
    if mc_draws > 0:
        mc_seed = 0 if seed is None else seed
        rc, rp, _, _ = average_rates(ics, report.bf, mc_draws, mc_seed)
        report.extras["mmf_rate_mc"] = (max_min_value(rp, rc.min()) if common
                                        else float(rp.min()))
    return report


def sdma_solve(channel: Union[ChannelSet, ImperfectChannelSet], tx_power_budget: float,
               cfg: EgfpConfig = None, seed: Optional[int] = None,
               mc_draws: int = 0) -> SolverReport:
    """MMF beamforming without a common stream (``p_c = 0``, ``c = 0``)."""
    if isinstance(channel, ImperfectChannelSet):
        return egfp_solve_imperfect(channel, tx_power_budget, cfg, seed, False, mc_draws)
    return solve(channel, tx_power_budget, cfg or EgfpConfig(), seed, common=False)
