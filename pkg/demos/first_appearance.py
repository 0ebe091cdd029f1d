"""
When does each community show up?
=================================

The first-appearance order m of a community is the rank of its earliest
alter.  If every step picks one of c communities uniformly, m follows a
geometric law whose decay scale is close to c.
"""

from collections import defaultdict

import numpy as np

from egohomophily import (
    FirstAppearanceSample,
    ModelConfig,
    fit_exponential_scale,
    geometric_pcm,
    geometric_scale,
    pcm_distribution,
    simulate_ego,
)
from egohomophily.model import ego_rng

cfg = ModelConfig(k_real=150, n_egos=8000, seed=11)
by_c = defaultdict(list)
for i in range(cfg.n_egos):
    ego = simulate_ego(cfg, ego_rng(cfg.seed, i))
    by_c[ego.n_communities].append(FirstAppearanceSample(i, np.sort(ego.first_appearance())))

c = max(by_c, key=lambda x: len(by_c[x]))
dist = pcm_distribution(by_c[c], c)
print(f"most common c = {c} ({len(by_c[c])} egos)")
for m in range(1, 6):
    print(f"  P({m}) = {dist[m][0]:.4f}   geometric {geometric_pcm(c, m):.4f}")

fit = fit_exponential_scale(dist, m_max=25)
print(f"fitted m0 = {fit.m0:.2f}, exact geometric scale {geometric_scale(c):.2f}, R^2 = {fit.r2:.3f}")
