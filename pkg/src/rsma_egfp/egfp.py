"""EG-FP outer loop and its low-dimensional variant.

Each outer iteration refreshes the FP auxiliaries in closed form, solves
the resulting convex subproblem with extragradient iterations and rescales
the beams to full power. The low-dimensional variant restricts every beam
to the span of the user channels and runs the same loop on a ``K``-row
reduced channel, independent of the antenna count.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .allocation import max_min_value, optimal_c_given_P
from .extragradient import EgConfig, initial_duals, solve_subproblem
from .fp import FpAuxiliaries, surrogates, update_aux
from .model import BeamformingState, ChannelSet, normalize_power, rates, sinrs

__all__ = [
    "EgfpConfig",
    "SolverReport",
    "LowDimProblem",
    "mrt_init",
    "surrogate_objective",
    "optimal_mmf",
    "egfp_solve",
    "build_lowdim",
    "lowdim_egfp_solve",
    "recover_beams",
    "solve",
]

FULL = "full"
LOWDIM = "lowdim"


@dataclass(frozen=True)
class EgfpConfig:
    """Outer-loop settings.

    A subproblem solution that lowers the surrogate objective is refined
    ``max_refinements`` times with ten-fold tighter inner tolerances; if it
    still does not improve, the step is rejected and the loop stops.
    """

    outer_tol: float = 1e-3
    max_outer_iters: int = 200
    eg: EgConfig = field(default_factory=EgConfig)
    variant: str = FULL
    max_refinements: int = 2

    def __post_init__(self):
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.variant not in (FULL, LOWDIM):
            raise ValueError(f"variant must be {FULL!r} or {LOWDIM!r}")


@dataclass
class SolverReport:
    """Outcome of one EG-FP run.

    ``trace`` has one dict per outer iteration, entry 0 being the start:

    * ``outer_obj``: clipped MMF rate with the solver's own ``c``;
    * ``mmf_opt``: MMF rate of the same beams with the exact split;
    * ``surrogate_start`` / ``surrogate_end``: surrogate objective before
      and after the subproblem solve, both with that iteration's auxiliaries;
    * ``accepted``: False only for a final rejected step.

    ``kkt_point`` is ``(bf, aux, dual)`` of the last accepted subproblem
    solve, before power normalization; ``weights`` holds ``W`` with
    ``P = H W`` for the low-dimensional variant. ``extras`` must stay
    JSON-serializable.
    """

    mmf_rate: float
    bf: BeamformingState
    outer_iters: int
    inner_iters_total: int
    elapsed_seconds: float
    variant: str
    seed: Optional[int]
    termination: str
    trace: list = field(default_factory=list)
    inner_traces: list = field(default_factory=list, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)
    kkt_point: Optional[tuple] = field(default=None, repr=False)
    extras: dict = field(default_factory=dict)

    @property
    def mmf_rate_bits(self) -> float:
        return self.mmf_rate / math.log(2.0)

    def to_dict(self) -> dict:
        return {
            "mmf_rate_nats": self.mmf_rate,
            "outer_iters": self.outer_iters,
            "inner_iters_total": self.inner_iters_total,
            "elapsed_seconds": self.elapsed_seconds,
            "variant": self.variant,
            "seed": self.seed,
            "termination": self.termination,
            "trace": self.trace,
            **self.extras,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def mrt_init(ch: ChannelSet, tx_power_budget: float) -> BeamformingState:
    """Equal-power MRT start: half the budget on the common beam."""
    H = ch.channels
    K = ch.num_users
    norms = np.sqrt(np.sum(H.real ** 2 + H.imag ** 2, axis=0))
    Pp = H / norms * math.sqrt(tx_power_budget / (2 * K))
    u = H @ (1.0 / norms)
    pc = u / math.sqrt(np.real(np.vdot(u, u))) * math.sqrt(tx_power_budget / 2)
    return BeamformingState(pc, Pp)


def surrogate_objective(ch: ChannelSet, P: np.ndarray, aux: FpAuxiliaries,
                        common: bool = True) -> float:
    """Best FP-surrogate MMF value over ``c`` for fixed beams and auxiliaries.

    The common-rate pool is ``max(0, min_k g_c,k)``.
    """
    gc, gp = surrogates(ch, P, aux)
    if not common:
        return float(gp.min())
    return max_min_value(gp, gc.min())


def optimal_mmf(ch: ChannelSet, P: np.ndarray, common: bool = True) -> float:
    """MMF rate of beams ``P`` with the exact common-rate split."""
    gc, gp = sinrs(ch, P)
    rp = np.log1p(gp)
    if not common:
        return float(rp.min())
    return max_min_value(rp, np.log1p(gc).min())


def _tighter(eg: EgConfig) -> EgConfig:
    rt = None if eg.residual_tol is None else eg.residual_tol / 10
    return replace(eg, inner_tol=eg.inner_tol / 10, residual_tol=rt)


def _run(ch: ChannelSet, budget: float, bf: BeamformingState, cfg: EgfpConfig,
         common: bool = True):
    """Outer loop on (possibly reduced) channel ``ch``; returns raw results."""
    M = ch.power_gram
    obj = rates(ch, bf).mmf_rate
    bf = bf.replace(t=obj)
    dual = initial_duals(ch.num_users, budget, common)
    trace = [{"iteration": 0, "outer_obj": obj,
              "mmf_opt": optimal_mmf(ch, bf.matrix, common),
              "surrogate_start": math.nan, "surrogate_end": math.nan,
              "inner_iters": 0, "refinements": 0, "accepted": True}]
    inner_traces = []
    inner_total = 0
    termination = "max_outer_iters"
    kkt_point = None
    m = 0
    for m in range(1, cfg.max_outer_iters + 1):
        aux = update_aux(ch, bf)
        F_start = surrogate_objective(ch, bf.matrix, aux, common)
        eg = cfg.eg
        sub = solve_subproblem(ch, bf, aux, dual, eg, budget, common)
        inner = sub.iterations
        inner_traces.append(sub.trace)
        cand = normalize_power(sub.bf, budget, M)
        F_end = surrogate_objective(ch, cand.matrix, aux, common)
        refinements = 0
        while F_end < F_start and refinements < cfg.max_refinements:
            refinements += 1
            eg = _tighter(eg)
            sub = solve_subproblem(ch, sub.bf, aux, sub.dual, eg, budget, common)
            inner += sub.iterations
            inner_traces.append(sub.trace)
            cand = normalize_power(sub.bf, budget, M)
            F_end = surrogate_objective(ch, cand.matrix, aux, common)
        inner_total += inner
        accepted = F_end >= F_start
        new_obj = rates(ch, cand).mmf_rate
        trace.append({
            "iteration": m, "outer_obj": new_obj,
            "mmf_opt": optimal_mmf(ch, cand.matrix, common),
            "surrogate_start": F_start, "surrogate_end": F_end,
            "inner_iters": inner, "refinements": refinements, "accepted": accepted,
        })
        if not accepted:
            termination = "stalled"
            break
        bf, dual = cand, sub.dual
        kkt_point = (sub.bf, aux, sub.dual)
        if abs(new_obj - obj) < cfg.outer_tol:
            termination = "converged"
            break
        obj = new_obj
    return bf, m, inner_total, termination, trace, inner_traces, kkt_point


def _polish(ch: ChannelSet, bf: BeamformingState, common: bool):
    """Replace ``c`` by the exact split; returns ``(bf, mmf_rate)``."""
    rv = rates(ch, bf)
    if not common:
        c = np.zeros(ch.num_users)
    else:
        c = optimal_c_given_P(rv.private_rates, rv.common_rate)
    mmf = float(np.min(rv.private_rates + c))
    return bf.replace(c=c, t=mmf), mmf


def _sdma_start(bf: BeamformingState, budget, power_gram=None) -> BeamformingState:
    bf = bf.replace(common=np.zeros_like(bf.common))
    return normalize_power(bf, budget, power_gram)


def egfp_solve(ch: ChannelSet, tx_power_budget: float, cfg: EgfpConfig = None,
               seed: Optional[int] = None, common: bool = True,
               init: Optional[BeamformingState] = None) -> SolverReport:
    """Full-dimensional EG-FP.

    ``seed`` is carried into the report only; the MRT start is deterministic.
    ``common=False`` solves the SDMA problem (no common stream).
    """
    cfg = cfg or EgfpConfig()
    start = time.perf_counter()
    bf0 = init if init is not None else mrt_init(ch, tx_power_budget)
    if not common:
        bf0 = _sdma_start(bf0, tx_power_budget, ch.power_gram)
    bf, m, inner, term, trace, inner_traces, kkt = _run(ch, tx_power_budget, bf0, cfg, common)
    bf, mmf = _polish(ch, bf, common)
    elapsed = time.perf_counter() - start
    return SolverReport(mmf, bf, m, inner, elapsed, FULL, seed, term, trace, inner_traces,
                        kkt_point=kkt)


@dataclass(frozen=True)
class LowDimProblem:
    """Reduced problem with every beam in the span of the channels.

    ``gram`` is ``G = H^H H``. In ``"orthonormal"`` coordinates the beams
    are ``p = U q`` with ``H = U S`` a thin QR factorization, so the
    reduced channels are the columns of ``S`` and the power stays
    ``tr(Q^H Q)``. In ``"gram"`` coordinates ``p = H q``, the reduced
    channels are the columns of ``G`` and the power is ``tr(Q^H G Q)``.
    Both describe the same set of beamformers.
    """

    channels: np.ndarray
    gram: np.ndarray
    basis: np.ndarray
    reduced: ChannelSet
    coordinates: str = "orthonormal"
    weights: Optional[np.ndarray] = None

    def to_antenna(self, Q) -> np.ndarray:
        return self.basis @ np.asarray(Q, complex)

    def channel_weights(self, Q) -> np.ndarray:
        """Weights ``W`` with ``P = H W`` for reduced variables ``Q``."""
        if self.coordinates == "gram":
            return np.asarray(Q, complex)
        W, *_ = np.linalg.lstsq(self.channels, self.to_antenna(Q), rcond=None)
        return W


def build_lowdim(ch: ChannelSet, coordinates: str = "orthonormal") -> LowDimProblem:
    H = ch.channels
    G = H.conj().T @ H
    G = 0.5 * (G + G.conj().T)
    if coordinates == "gram":
        B, S, M = H, G, G
    elif coordinates == "orthonormal":
        B, S = np.linalg.qr(H)
        M = None
    else:
        raise ValueError(f"unknown coordinates {coordinates!r}")
    R = None
    v = ch.error_scales
    if v is not None and coordinates == "orthonormal":
        R = v[:, None, None] * np.eye(B.shape[1])
    elif ch.error_covariances is not None:
        R = np.einsum("ai,kab,bj->kij", B.conj(), ch.error_covariances, B)
    reduced = ChannelSet(S, ch.noise_powers, R, M)
    return LowDimProblem(H, G, B, reduced, coordinates)


def recover_beams(ch, Q, c=None, t=0.0) -> BeamformingState:
    """``P = H Q`` columnwise, or ``P = U Q`` for a :class:`LowDimProblem`
    in orthonormal coordinates."""
    Q = Q.matrix if isinstance(Q, BeamformingState) else np.asarray(Q, complex)
    B = ch.basis if isinstance(ch, LowDimProblem) else ch.channels
    return BeamformingState.from_matrix(B @ Q, c, t)


def _gram_init(ld: LowDimProblem, budget: float) -> BeamformingState:
    """Weights reproducing :func:`mrt_init` through ``P = H Q``."""
    G = ld.gram
    K = G.shape[0]
    w = 1.0 / np.sqrt(np.real(np.diag(G)))
    Qp = np.diag(w) * math.sqrt(budget / (2 * K))
    qc = w / math.sqrt(np.real(np.vdot(w, G @ w))) * math.sqrt(budget / 2)
    return BeamformingState(qc.astype(complex), Qp.astype(complex))


def lowdim_egfp_solve(ch: ChannelSet, tx_power_budget: float, cfg: EgfpConfig = None,
                      seed: Optional[int] = None, common: bool = True,
                      coordinates: str = "orthonormal") -> SolverReport:
    """EG-FP on the reduced problem, mapped back to antenna space.

    In orthonormal coordinates the MRT start of the reduced problem is the
    full-dimensional MRT start, so both variants follow the same path.
    """
    cfg = cfg or EgfpConfig(variant=LOWDIM)
    start = time.perf_counter()
    ld = build_lowdim(ch, coordinates)
    red = ld.reduced
    if coordinates == "gram":
        q0 = _gram_init(ld, tx_power_budget)
    else:
        q0 = mrt_init(red, tx_power_budget)
    if not common:
        q0 = _sdma_start(q0, tx_power_budget, red.power_gram)
    qf, m, inner, term, trace, inner_traces, _ = _run(red, tx_power_budget, q0, cfg, common)
    bf = recover_beams(ld, qf.matrix, qf.c, qf.t)
    bf, mmf = _polish(ch, bf, common)
    elapsed = time.perf_counter() - start
    return SolverReport(mmf, bf, m, inner, elapsed, LOWDIM, seed, term, trace,
                        inner_traces, weights=ld.channel_weights(qf.matrix))


def solve(ch: ChannelSet, tx_power_budget: float, cfg: EgfpConfig = None,
          seed: Optional[int] = None, common: bool = True) -> SolverReport:
    """Dispatch on ``cfg.variant``."""
    cfg = cfg or EgfpConfig()
    if cfg.variant == LOWDIM:
        return lowdim_egfp_solve(ch, tx_power_budget, cfg, seed, common)
    return egfp_solve(ch, tx_power_budget, cfg, seed, common)
