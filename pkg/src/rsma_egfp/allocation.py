"""Exact max-min split of the common rate for fixed beams."""

import numpy as np

__all__ = ["optimal_c_given_P", "max_min_value"]


def optimal_c_given_P(private_rates, common_rate) -> np.ndarray:
    """Split ``common_rate`` to maximize ``min_k(r_k + c_k)``.

    Level filling: find ``L`` with ``sum_k max(0, L - r_k) = common_rate``
    and return ``c_k = max(0, L - r_k)``. Exact and non-iterative.
    """
    r = np.asarray(private_rates, dtype=float)
    pool = max(float(common_rate), 0.0)
    if pool == 0.0:
        return np.zeros_like(r)
    rs = np.sort(r)
    csum = np.cumsum(rs)
    K = len(rs)
    level = (pool + csum[-1]) / K
    for i in range(1, K):
        cand = (pool + csum[i - 1]) / i
        if cand <= rs[i]:
            level = cand
            break
    return np.maximum(level - r, 0.0)


def max_min_value(private_rates, common_rate) -> float:
    """Value ``min_k(r_k + c_k)`` at the optimal split."""
    r = np.asarray(private_rates, dtype=float)
    return float(np.min(r + optimal_c_given_P(r, common_rate)))
