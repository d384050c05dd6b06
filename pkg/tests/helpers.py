"""Random instances shared by the test modules."""

import numpy as np

from rsma_egfp.extragradient import DualState
from rsma_egfp.model import BeamformingState, ChannelSet, SystemConfig, gen_channel


def cn(rng, shape, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_psd(rng, n, scale=0.3):
    A = cn(rng, (n, n))
    return scale * (A @ A.conj().T) / n + 0.05 * np.eye(n)


def random_channel(seed, K=3, n=4, noise=None, errors=False, isotropic=False):
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.5, 2.0, K) if noise is None else noise
    H = cn(rng, (n, K))
    R = None
    if errors:
        if isotropic:
            R = rng.uniform(0.05, 0.3, K)[:, None, None] * np.eye(n)
        else:
            R = np.stack([random_psd(rng, n) for _ in range(K)])
    return ChannelSet(H, noise, R)


def random_beams(seed, K=3, n=4, scale=1.0, c=None, t=0.0):
    rng = np.random.default_rng(seed)
    P = scale * cn(rng, (n, K + 1))
    c = rng.uniform(0, 0.5, K) if c is None else c
    return BeamformingState.from_matrix(P, c, t)


def random_duals(seed, K=3):
    rng = np.random.default_rng(seed)
    return DualState(rng.uniform(0, 1, K), rng.uniform(0, 1, K), rng.uniform(0, 1, K),
                     rng.uniform(0.05, 1))


def iid_channel(K, n, snr_db, seed):
    cfg = SystemConfig.from_snr_db(K, n, snr_db)
    return gen_channel(cfg, seed), cfg.tx_power
