"""
The community growth model
==========================

Each ego owns communities with power-law sizes.  Alters are added by picking
a surviving community at random and taking its best-matching member first.
The first member of every community carries an extra overlap, which shapes
the mean overlap of the k-th alter.
"""

import numpy as np

from egohomophily import (
    ModelConfig,
    local_extrema,
    model_community_overlap,
    model_order_overlap,
    moving_average,
    simulate_ensemble,
)

# analytic overlap of the n-th member of a size-s community
for s in (2, 5, 20):
    print(s, [round(model_order_overlap(s, n), 4) for n in range(1, min(s, 4) + 1)])

# community-averaged overlap rises, peaks and slowly falls
sizes = np.arange(2, 101)
curve = model_community_overlap(sizes)
print("peak at s =", sizes[np.argmax(curve)], "value", round(curve.max(), 5))

# ensemble of grown egos: mean overlap of the k-th added alter
for k_real in (150, 300):
    ens = simulate_ensemble(ModelConfig(k_real=k_real, n_egos=2000, seed=3))
    smooth = moving_average(ens.mean, 5)
    lo, hi = local_extrema(smooth)
    print(f"k_real={k_real}: <o>(1)={ens.mean[0]:.4f}, local min at k={lo + 1}, "
          f"local max at k={hi + 1}, end value {smooth[-1]:.4f}")
