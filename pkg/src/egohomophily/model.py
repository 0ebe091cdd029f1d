"""Generative growth model of egocentric networks.

An ego owns a fixed set of real-world communities with power-law sizes.
Alters are added one by one: pick a surviving community uniformly at random,
take its remaining member with the largest overlap, drop the community once
empty.  Averaging the overlap of the k-th added alter over many egos gives
the model's egocentric overlap curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .metrics import BinnedCurve

__all__ = [
    "ModelConfig",
    "OverlapModel",
    "SyntheticEgo",
    "first_appearance_from_sequence",
    "local_extrema",
    "model_community_overlap",
    "model_order_overlap",
    "moving_average",
    "sample_community_sizes",
    "simulate_ego",
    "simulate_ensemble",
    "size_distribution",
]


@dataclass(frozen=True)
class OverlapModel:
    """Constants of the appearance-order overlap curve.

    o_s(n) = (1 - 1/(s + shift)) * a / (s**b + c0) + bump * [n == 1]
    """

    a: float = 60.0
    b: float = 0.7
    c0: float = 100.0
    bump: float = 0.07
    shift: float = 2.0

    def base(self, s):
        s = np.asarray(s, dtype=float)
        return (1.0 - 1.0 / (s + self.shift)) * (self.a / (s ** self.b + self.c0))


@dataclass(frozen=True)
class ModelConfig:
    k_real: int = 150
    exponent: float = -1.5
    s_min: int = 2
    s_max: int = 100
    overlap: OverlapModel = field(default_factory=OverlapModel)
    n_egos: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.s_min < 1:
            raise ValueError("s_min must be >= 1")
        if self.s_max < self.s_min:
            raise ValueError("s_max must be >= s_min")
        if self.k_real < 1:
            raise ValueError("k_real must be >= 1")
        if self.n_egos < 1:
            raise ValueError("n_egos must be >= 1")


def size_distribution(cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of the truncated power-law size law."""
    s = np.arange(cfg.s_min, cfg.s_max + 1)
    w = s.astype(float) ** cfg.exponent
    return s, w / w.sum()


def sample_community_sizes(cfg: ModelConfig, rng: np.random.Generator) -> list[int]:
    """Draw community sizes until they sum to ``k_real``.

    A draw that overshoots the remaining budget is truncated to the
    remainder, so the last community may be smaller than ``s_min``.
    """
    support, prob = size_distribution(cfg)
    cdf = np.cumsum(prob)
    sizes = []
    left = cfg.k_real
    while left > 0:
        # draws in blocks; most egos need far fewer than k_real / s_min
        for u in rng.random(max(4, left // 8)):
            s = int(support[min(np.searchsorted(cdf, u, side="right"), len(support) - 1)])
            s = min(s, left)
            sizes.append(s)
            left -= s
            if left == 0:
                break
    return sizes


def model_order_overlap(s: int, n: int, params: OverlapModel = OverlapModel()) -> float:
    """Overlap of the n-th appearing member of a size-s community."""
    if not 1 <= n <= s:
        raise ValueError(f"order n={n} outside 1..{s}")
    return float(params.base(s)) + (params.bump if n == 1 else 0.0)


def model_community_overlap(s, params: OverlapModel = OverlapModel()):
    """Mean member overlap of a size-s community (accepts arrays)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 1):
        raise ValueError("community size must be >= 1")
    out = params.base(s_arr) + params.bump / s_arr
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SyntheticEgo:
    """Outcome of growing one ego.

    ``sizes[r]`` is the size of community r; step k (0-based) added member
    ``members[k]`` (1-based order n within its community) of community
    ``picks[k]``, whose overlap was ``overlaps[k]``.
    """

    sizes: np.ndarray
    picks: np.ndarray
    members: np.ndarray
    overlaps: np.ndarray

    @property
    def n_communities(self) -> int:
        return len(self.sizes)

    def first_appearance(self) -> np.ndarray:
        return first_appearance_from_sequence(self.picks, self.n_communities)


def first_appearance_from_sequence(picks: np.ndarray, n_communities: int) -> np.ndarray:
    """1-based step at which each community first contributed an alter.

    Communities that never appear get 0.
    """
    picks = np.asarray(picks)
    out = np.zeros(n_communities, dtype=np.int64)
    steps = np.arange(len(picks), 0, -1)
    # assigning in reverse leaves the earliest step in place
    out[picks[::-1]] = steps
    return out


def simulate_ego(cfg: ModelConfig, rng: np.random.Generator, sizes=None) -> SyntheticEgo:
    """Grow one ego network to ``k_real`` alters.

    Within a community the member with the largest overlap is taken first
    (n = 1 carries the bump); the remaining members tie and are taken in
    ascending n.
    """
    sizes = np.asarray(sample_community_sizes(cfg, rng) if sizes is None else sizes, dtype=np.int64)
    steps = min(cfg.k_real, int(sizes.sum()))
    picks, members = _grow(sizes, rng.random(steps))
    base = cfg.overlap.base(sizes[picks]) if steps else np.zeros(0)
    overlaps = base + np.where(members == 1, cfg.overlap.bump, 0.0)
    return SyntheticEgo(sizes, picks, members, overlaps)


@numba.njit(cache=True)
def _grow(sizes, uniforms):
    steps = len(uniforms)
    remaining = sizes.copy()
    alive = np.arange(len(sizes))
    n_alive = len(sizes)
    picks = np.empty(steps, np.int64)
    members = np.empty(steps, np.int64)
    for k in range(steps):
        j = int(uniforms[k] * n_alive)
        r = alive[j]
        picks[k] = r
        members[k] = sizes[r] - remaining[r] + 1
        remaining[r] -= 1
        if remaining[r] == 0:
            n_alive -= 1
            alive[j] = alive[n_alive]
    return picks, members


def ego_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(index), int(seed)])


def simulate_ensemble(cfg: ModelConfig, return_egos: bool = False):
    """Mean overlap of the k-th added alter over ``cfg.n_egos`` grown egos.

    Ego ``i`` draws from its own stream seeded by ``(seed, i)``, so results do
    not depend on evaluation order.
    """
    K = cfg.k_real
    sums = np.zeros(K)
    sq = np.zeros(K)
    counts = np.zeros(K, dtype=np.int64)
    egos = []
    for i in range(cfg.n_egos):
        ego = simulate_ego(cfg, ego_rng(cfg.seed, i))
        L = len(ego.overlaps)
        sums[:L] += ego.overlaps
        sq[:L] += ego.overlaps ** 2
        counts[:L] += 1
        if return_egos:
            egos.append(ego)
    curve = BinnedCurve.from_moments(np.arange(1, K + 1), sums, sq, counts)
    return (curve, egos) if return_egos else curve


def moving_average(y, window: int = 5) -> np.ndarray:
    """Centered moving average; the window shrinks at the ends."""
    y = np.asarray(y, dtype=float)
    h = window // 2
    c = np.concatenate([[0.0], np.cumsum(y)])
    idx = np.arange(len(y))
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h + 1, len(y))
    return (c[hi] - c[lo]) / (hi - lo)


def local_extrema(y) -> tuple[int, int]:
    """Positions (0-based) of the valley and peak bounding the largest rise.

    Searches ``i < j`` (``i >= 1``, so the opening value is excluded)
    maximizing ``y[j] - y[i]``: ``i`` is the interior local minimum and ``j``
    the local maximum that follows it.  Picking the largest rise rather than
    the first sign change keeps Monte-Carlo wiggles from registering.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise ValueError("need at least three points")
    lo = 1
    best = (-np.inf, 1, 1)
    for j in range(1, len(y)):
        if y[j] < y[lo]:
            lo = j
        if y[j] - y[lo] > best[0]:
            best = (y[j] - y[lo], lo, j)
    return best[1], best[2]
