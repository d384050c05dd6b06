import json
import math

import numpy as np
import pytest

from helpers import iid_channel
from rsma_egfp.egfp import (
    EgfpConfig,
    build_lowdim,
    egfp_solve,
    lowdim_egfp_solve,
    mrt_init,
    optimal_mmf,
    recover_beams,
    solve,
    surrogate_objective,
)
from rsma_egfp.fp import update_aux
from rsma_egfp.model import ChannelSet, SystemConfig, gen_channel, rates, sinrs, tx_power
from rsma_egfp.oracle import grid_search_2user


def surrogate_chain(report):
    """``F`` at the start and end of every accepted outer iteration, in order."""
    chain = []
    for entry in report.trace[1:]:
        if entry["accepted"]:
            chain += [entry["surrogate_start"], entry["surrogate_end"]]
    return np.array(chain)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            EgfpConfig(outer_tol=0.0)
        with pytest.raises(ValueError):
            EgfpConfig(max_outer_iters=0)
        with pytest.raises(ValueError):
            EgfpConfig(variant="tiny")


class TestInit:
    def test_mrt(self):
        ch, Pt = iid_channel(3, 5, 10, 0)
        bf = mrt_init(ch, Pt)
        assert tx_power(bf) == pytest.approx(Pt, rel=1e-12)
        for k in range(3):
            h = ch.channel(k)
            p = bf.private[:, k]
            assert abs(np.vdot(h, p)) == pytest.approx(np.linalg.norm(h) * np.linalg.norm(p))
        assert np.linalg.norm(bf.common) ** 2 == pytest.approx(Pt / 2)


class TestSolve:
    @pytest.mark.parametrize("seed", range(3))
    def test_single_user_capacity(self, seed):
        ch, _ = iid_channel(1, 2, 10, seed)
        Pt = 10.0
        report = egfp_solve(ch, Pt)
        cap = math.log1p(Pt * np.linalg.norm(ch.channel(0)) ** 2)
        assert abs(report.mmf_rate - cap) / cap < 0.01

    def test_orthogonal_users(self):
        ch = ChannelSet(np.eye(2), 1.0)
        report = egfp_solve(ch, 10.0)
        assert abs(report.mmf_rate - math.log(6)) / math.log(6) < 0.02
        assert report.mmf_rate >= grid_search_2user(ch, 10.0) * 0.98

    @pytest.mark.parametrize("seed", range(4))
    def test_monotone_trace(self, seed):
        ch, Pt = iid_channel(3, 4, 10, seed)
        report = egfp_solve(ch, Pt)
        accepted = [e for e in report.trace if e["accepted"]]
        obj = np.array([e["outer_obj"] for e in accepted])
        assert np.all(np.diff(obj) >= -1e-6)
        assert np.all(np.diff(surrogate_chain(report)) >= -1e-6)

    @pytest.mark.parametrize("seed", range(3))
    def test_surrogate_chain_is_tight(self, seed):
        # F at the start of iteration m is the exact-split rate of iteration m - 1,
        # and F at the end never exceeds the exact-split rate of the new beams
        ch, Pt = iid_channel(3, 4, 10, seed)
        report = egfp_solve(ch, Pt)
        tr = report.trace
        for m in range(1, len(tr)):
            assert tr[m]["surrogate_start"] == pytest.approx(tr[m - 1]["mmf_opt"], abs=1e-10)
            assert tr[m]["mmf_opt"] >= tr[m]["surrogate_end"] - 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_feasible_output(self, seed):
        ch, Pt = iid_channel(3, 4, 10, seed)
        report = egfp_solve(ch, Pt)
        rv = rates(ch, report.bf)
        assert tx_power(report.bf) <= Pt + 1e-9
        assert np.all(report.bf.c >= -1e-12)
        assert report.bf.c.sum() <= rv.common_rate + 1e-6
        assert report.mmf_rate == pytest.approx(optimal_mmf(ch, report.bf.matrix), abs=1e-12)
        assert report.termination == "converged"

    @pytest.mark.parametrize("seed", range(3))
    def test_column_space(self, seed):
        ch, Pt = iid_channel(3, 8, 10, seed)
        P = egfp_solve(ch, Pt).bf.matrix
        U, _ = np.linalg.qr(ch.channels)
        rest = P - U @ (U.conj().T @ P)
        assert np.sum(np.abs(rest) ** 2) / np.sum(np.abs(P) ** 2) < 1e-3

    def test_sdma_has_no_common_stream(self):
        ch, Pt = iid_channel(3, 4, 10, 0)
        report = egfp_solve(ch, Pt, common=False)
        assert np.all(report.bf.common == 0) and np.all(report.bf.c == 0)
        assert report.mmf_rate <= egfp_solve(ch, Pt).mmf_rate + 1e-3

    def test_report_json(self):
        ch, Pt = iid_channel(2, 2, 10, 0)
        report = egfp_solve(ch, Pt, seed=5)
        data = json.loads(report.to_json())
        assert set(data) >= {"mmf_rate_nats", "outer_iters", "inner_iters_total",
                             "elapsed_seconds", "variant", "seed", "trace"}
        assert data["seed"] == 5 and data["variant"] == "full"
        assert len(data["trace"]) == report.outer_iters + 1
        assert report.mmf_rate_bits == pytest.approx(report.mmf_rate / math.log(2))

    def test_outer_cap(self):
        ch, Pt = iid_channel(3, 4, 10, 0)
        report = egfp_solve(ch, Pt, EgfpConfig(max_outer_iters=1))
        assert report.outer_iters == 1 and report.termination == "max_outer_iters"


class TestLowDim:
    def test_identity_gram(self):
        ld = build_lowdim(ChannelSet(np.eye(3), 1.0))
        np.testing.assert_array_equal(ld.gram, np.eye(3))
        np.testing.assert_array_equal(ld.reduced.channels, np.eye(3))

    @pytest.mark.parametrize("K,n", [(3, 6), (4, 4), (5, 3)])
    def test_gram_properties(self, K, n):
        ch = gen_channel(SystemConfig(K, n, 1.0), K * n)
        G = build_lowdim(ch).gram
        assert np.max(np.abs(G - G.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(G).min() >= -1e-10
        assert np.linalg.matrix_rank(G) == min(K, n)

    @pytest.mark.parametrize("coordinates", ["orthonormal", "gram"])
    def test_reduced_rates_match(self, coordinates):
        ch, Pt = iid_channel(3, 6, 10, 1)
        ld = build_lowdim(ch, coordinates)
        rng = np.random.default_rng(0)
        Q = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        P = recover_beams(ld, Q).matrix
        np.testing.assert_allclose(sinrs(ld.reduced, Q), sinrs(ch, P), rtol=1e-10)
        assert tx_power(Q, ld.reduced.power_gram) == pytest.approx(tx_power(P), rel=1e-10)

    def test_identity_channel_bitwise(self):
        ch = ChannelSet(np.eye(3) * 1.3, 1.0)
        full = egfp_solve(ch, 10.0)
        low = lowdim_egfp_solve(ch, 10.0)
        np.testing.assert_array_equal(low.bf.matrix, full.bf.matrix)
        assert low.mmf_rate == full.mmf_rate
        assert [e["outer_obj"] for e in low.trace] == [e["outer_obj"] for e in full.trace]

    def test_matches_full_dimension(self):
        ch, Pt = iid_channel(4, 16, 10, 0)
        full = egfp_solve(ch, Pt)
        low = lowdim_egfp_solve(ch, Pt)
        assert abs(low.mmf_rate - full.mmf_rate) / full.mmf_rate < 0.01
        assert tx_power(low.bf) == pytest.approx(Pt, abs=1e-10)

    def test_gram_coordinates_agree(self):
        ch, Pt = iid_channel(2, 4, 10, 3)
        full = egfp_solve(ch, Pt)
        low = lowdim_egfp_solve(ch, Pt, coordinates="gram")
        assert abs(low.mmf_rate - full.mmf_rate) / full.mmf_rate < 0.01
        assert tx_power(low.bf) == pytest.approx(Pt, rel=1e-10)

    def test_weights_recover_beams(self):
        ch, Pt = iid_channel(3, 6, 10, 2)
        low = lowdim_egfp_solve(ch, Pt)
        np.testing.assert_allclose(ch.channels @ low.weights, low.bf.matrix, atol=1e-10)

    def test_dispatch(self):
        ch, Pt = iid_channel(2, 4, 10, 0)
        assert solve(ch, Pt, EgfpConfig(variant="lowdim")).variant == "lowdim"
        assert solve(ch, Pt).variant == "full"


class TestRecover:
    def test_zero(self):
        ch, _ = iid_channel(2, 4, 10, 0)
        assert np.all(recover_beams(ch, np.zeros((2, 3))).matrix == 0)

    def test_identity(self):
        Q = np.arange(6.0).reshape(2, 3) + 1j
        np.testing.assert_array_equal(recover_beams(ChannelSet(np.eye(2), 1.0), Q).matrix, Q)

    def test_power_identity(self):
        ch, _ = iid_channel(3, 7, 10, 4)
        rng = np.random.default_rng(1)
        Q = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        G = ch.channels.conj().T @ ch.channels
        P = recover_beams(ch, Q).matrix
        assert tx_power(P) == pytest.approx(np.real(np.trace(Q.conj().T @ G @ Q)), abs=1e-10)


def test_surrogate_objective_tight_at_aux_point():
    ch, Pt = iid_channel(3, 4, 10, 0)
    bf = mrt_init(ch, Pt)
    aux = update_aux(ch, bf)
    assert surrogate_objective(ch, bf.matrix, aux) == pytest.approx(
        optimal_mmf(ch, bf.matrix), abs=1e-12)
