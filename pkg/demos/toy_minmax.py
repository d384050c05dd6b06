"""
Extragradient on a bilinear saddle
==================================

The game ``min_x max_y x*y`` has its only saddle at the origin. A plain
gradient step rotates the iterate outward; the extragradient step looks
ahead first and contracts.
"""

import numpy as np

from rsma_egfp.extragradient import toy_minmax_demo

# one-step gradient, fixed step 0.1: each step scales the distance by sqrt(1.01)
one = toy_minmax_demo((1.0, 1.0), alpha=0.1, steps=100, mode="one-step")
d_one = np.linalg.norm(one, axis=1)
print(f"one-step:      |v_0| = {d_one[0]:.3f}  |v_100| = {d_one[-1]:.3f}")

# the same step size with a look-ahead
eg = toy_minmax_demo((1.0, 1.0), alpha=0.1, steps=100, mode="extragradient")
print(f"extragradient: |v_100| = {np.linalg.norm(eg[-1]):.3f}")

# Khobotov's rule shrinks a large trial step until it is safe
adapt = toy_minmax_demo((1.0, 1.0), alpha=0.5, steps=500, mode="extragradient", beta=0.8)
d = np.linalg.norm(adapt, axis=1)
print(f"adaptive step: below 1e-3 after {np.argmax(d < 1e-3)} iterations")

for i in (0, 10, 20, 40, 80):
    print(f"  iteration {i:3d}  ({adapt[i, 0]:+.4f}, {adapt[i, 1]:+.4f})")
