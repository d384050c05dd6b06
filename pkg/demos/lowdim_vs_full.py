"""
Solving in the span of the channels
===================================

Optimal beams lie in the column space of ``H``, so EG-FP can run on
``min(K, N_t)``-dimensional coefficients instead of ``N_t``-dimensional
beams. With many antennas this saves time and loses nothing.
"""

from rsma_egfp import (
    SystemConfig,
    build_lowdim,
    egfp_solve,
    gen_channel,
    lowdim_egfp_solve,
    tx_power,
)

K = 8
for Nt in (8, 32, 64):
    cfg = SystemConfig.from_snr_db(K, Nt, 10)
    ch = gen_channel(cfg, seed=Nt)
    ld = build_lowdim(ch)
    full = egfp_solve(ch, cfg.tx_power)
    low = lowdim_egfp_solve(ch, cfg.tx_power)
    gap = abs(low.mmf_rate - full.mmf_rate) / full.mmf_rate
    print(f"Nt={Nt:3d}: reduced dim {ld.reduced.channels.shape[0]}, "
          f"MMF full {full.mmf_rate:.4f} / low {low.mmf_rate:.4f} (rel diff {gap:.1e}), "
          f"time {full.elapsed_seconds:.2f} s / {low.elapsed_seconds:.2f} s")

# recovered beams use the budget exactly
print(f"power of recovered beams: {tx_power(low.bf):.12f} (budget {cfg.tx_power})")
