"""Two-level map equation: codelength and a greedy optimizer for ego networks.

The random walk is the plain undirected one (visit rate of a node is its
degree over twice the edge count, no teleportation).  With module exit rates
``q_i`` and module flows ``p_i`` the two-level codelength is

    L = plogp(sum q_i) - 2 sum plogp(q_i) - sum plogp(p_node) + sum plogp(q_i + p_i)

which is the expanded form of ``q H(Q) + sum_i p_i H(P_i)`` in bits.

The search is Louvain-like: sweeps of single-node moves in random order,
aggregation of modules into super-nodes, recursion, then a fine-tuning pass
that moves the original nodes again.  Several seeded trials are run and the
shortest description kept.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .graph import EgoNetwork

__all__ = [
    "CommunityAssignment",
    "codelength",
    "community_size_histogram",
    "detect_communities",
    "ego_seed",
    "ego_subgraph",
    "optimize_partition",
]

MIN_GAIN = 1e-10
DEFAULT_TRIALS = 10


@numba.njit(cache=True)
def _plogp(x):
    if x > 0.0:
        return x * np.log2(x)
    return 0.0


@numba.njit(cache=True)
def _module_stats(indptr, indices, weights, flow, exit_, labels, n_mod):
    mod_flow = np.zeros(n_mod)
    mod_exit = np.zeros(n_mod)
    for a in range(len(flow)):
        m = labels[a]
        mod_flow[m] += flow[a]
        mod_exit[m] += exit_[a]
        for e in range(indptr[a], indptr[a + 1]):
            if labels[indices[e]] == m:
                mod_exit[m] -= weights[e]
    for m in range(n_mod):
        if mod_exit[m] < 0.0:
            mod_exit[m] = 0.0
    return mod_flow, mod_exit


@numba.njit(cache=True)
def _codelength(indptr, indices, weights, flow, labels, n_mod, node_term):
    mod_flow, mod_exit = _module_stats(indptr, indices, weights, flow, flow, labels, n_mod)
    total_exit = 0.0
    s_exit = 0.0
    s_both = 0.0
    for m in range(n_mod):
        total_exit += mod_exit[m]
        s_exit += _plogp(mod_exit[m])
        s_both += _plogp(mod_exit[m] + mod_flow[m])
    return _plogp(total_exit) - 2.0 * s_exit - node_term + s_both


@numba.njit(cache=True)
def _relabel(labels):
    n = len(labels)
    remap = np.full(labels.max() + 1 if n else 0, -1, np.int64)
    out = np.empty(n, np.int64)
    k = 0
    for i in range(n):
        m = labels[i]
        if remap[m] < 0:
            remap[m] = k
            k += 1
        out[i] = remap[m]
    return out, k


@numba.njit(cache=True)
def _move_nodes(indptr, indices, weights, flow, exit_, labels):
    """Greedy single-node moves until no move shortens the code.

    ``labels`` (values < n) is the starting partition and is updated in
    place.  Returns the number of moves performed.
    """
    n = len(flow)
    mod_flow, mod_exit = _module_stats(indptr, indices, weights, flow, exit_, labels, n)
    mod_size = np.zeros(n, np.int64)
    for a in range(n):
        mod_size[labels[a]] += 1
    empty = np.empty(n, np.int64)
    n_empty = 0
    for m in range(n - 1, -1, -1):
        if mod_size[m] == 0:
            empty[n_empty] = m
            n_empty += 1
    total_exit = 0.0
    for m in range(n):
        total_exit += mod_exit[m]

    wto = np.zeros(n)
    stamp = np.full(n, -1, np.int64)
    cand = np.empty(n + 1, np.int64)
    moves = 0
    for sweep in range(10000):
        order = np.random.permutation(n)
        moved = 0
        for idx in range(n):
            a = order[idx]
            if indptr[a] == indptr[a + 1]:
                continue
            ma = labels[a]
            n_cand = 0
            for e in range(indptr[a], indptr[a + 1]):
                m = labels[indices[e]]
                if stamp[m] != a + sweep * n:
                    stamp[m] = a + sweep * n
                    wto[m] = 0.0
                    cand[n_cand] = m
                    n_cand += 1
                wto[m] += weights[e]
            w_own = wto[ma] if stamp[ma] == a + sweep * n else 0.0
            if mod_size[ma] > 1 and n_empty > 0:
                m = empty[n_empty - 1]
                stamp[m] = a + sweep * n
                wto[m] = 0.0
                cand[n_cand] = m
                n_cand += 1

            qa, pa = mod_exit[ma], mod_flow[ma]
            qa_new = qa - exit_[a] + 2.0 * w_own
            if qa_new < 0.0:
                qa_new = 0.0
            pa_new = pa - flow[a]
            if mod_size[ma] == 1:
                qa_new = 0.0
                pa_new = 0.0
            base_exit = total_exit - qa + qa_new
            old_a = -2.0 * _plogp(qa) + _plogp(qa + pa)
            new_a = -2.0 * _plogp(qa_new) + _plogp(qa_new + pa_new)
            plogp_total = _plogp(total_exit)

            best_delta = 0.0
            best_m = ma
            best_q = 0.0
            for c in range(n_cand):
                mb = cand[c]
                if mb == ma:
                    continue
                qb, pb = mod_exit[mb], mod_flow[mb]
                qb_new = qb + exit_[a] - 2.0 * wto[mb]
                if qb_new < 0.0:
                    qb_new = 0.0
                pb_new = pb + flow[a]
                new_total = base_exit - qb + qb_new
                delta = (_plogp(new_total) - plogp_total
                         + new_a - old_a
                         - 2.0 * _plogp(qb_new) + _plogp(qb_new + pb_new)
                         + 2.0 * _plogp(qb) - _plogp(qb + pb))
                if delta < best_delta - 1e-14 or (abs(delta - best_delta) <= 1e-14 and mb < best_m and best_m != ma):
                    best_delta = delta
                    best_m = mb
                    best_q = qb_new

            if best_m != ma and best_delta < -MIN_GAIN:
                mb = best_m
                total_exit += (qa_new - qa) + (best_q - mod_exit[mb])
                mod_exit[ma] = qa_new
                mod_flow[ma] = pa_new
                mod_exit[mb] = best_q
                mod_flow[mb] += flow[a]
                if mod_size[mb] == 0:
                    n_empty -= 1
                mod_size[ma] -= 1
                mod_size[mb] += 1
                if mod_size[ma] == 0:
                    empty[n_empty] = ma
                    n_empty += 1
                labels[a] = mb
                moved += 1
        moves += moved
        if moved == 0:
            break
    return moves


@numba.njit(cache=True)
def _aggregate(indptr, indices, weights, flow, exit_, labels, n_mod):
    """Collapse modules into super-nodes; returns the super-node graph."""
    n = len(flow)
    new_flow = np.zeros(n_mod)
    for a in range(n):
        new_flow[labels[a]] += flow[a]
    _, new_exit = _module_stats(indptr, indices, weights, flow, exit_, labels, n_mod)
    n_e = 0
    for a in range(n):
        for e in range(indptr[a], indptr[a + 1]):
            if labels[indices[e]] != labels[a]:
                n_e += 1
    keys = np.empty(n_e, np.int64)
    ws = np.empty(n_e)
    k = 0
    for a in range(n):
        la = labels[a]
        for e in range(indptr[a], indptr[a + 1]):
            lb = labels[indices[e]]
            if lb != la:
                keys[k] = la * n_mod + lb
                ws[k] = weights[e]
                k += 1
    order = np.argsort(keys, kind="mergesort")
    new_indptr = np.zeros(n_mod + 1, np.int64)
    new_indices = np.empty(n_e, np.int64)
    new_weights = np.empty(n_e)
    m = -1
    prev = -1
    for i in range(n_e):
        key = keys[order[i]]
        if key != prev:
            m += 1
            new_indices[m] = key % n_mod
            new_weights[m] = 0.0
            new_indptr[key // n_mod + 1] += 1
            prev = key
        new_weights[m] += ws[order[i]]
    for i in range(n_mod):
        new_indptr[i + 1] += new_indptr[i]
    return new_indptr, new_indices[:m + 1], new_weights[:m + 1], new_flow, new_exit


@numba.njit(cache=True)
def _trial(indptr, indices, weights, flow, node_term, seed, max_rounds):
    np.random.seed(seed)
    n = len(flow)
    labels = np.arange(n)
    best_len = _codelength(indptr, indices, weights, flow, labels, n, node_term)
    for _ in range(max_rounds):
        # coarse phase: aggregate the current partition and keep merging
        labels, n_mod = _relabel(labels)
        g_indptr, g_indices, g_weights, g_flow, g_exit = _aggregate(
            indptr, indices, weights, flow, flow, labels, n_mod)
        while True:
            sub = np.arange(len(g_flow))
            _move_nodes(g_indptr, g_indices, g_weights, g_flow, g_exit, sub)
            sub, n_sub = _relabel(sub)
            if n_sub == len(g_flow):
                break
            labels = sub[labels]
            g_indptr, g_indices, g_weights, g_flow, g_exit = _aggregate(
                g_indptr, g_indices, g_weights, g_flow, g_exit, sub, n_sub)
        labels, n_mod = _relabel(labels)
        cur = _codelength(indptr, indices, weights, flow, labels, n_mod, node_term)
        # fine phase: let single original nodes leave their modules
        fine = labels.copy()
        moves = _move_nodes(indptr, indices, weights, flow, flow, fine)
        fine, n_fine = _relabel(fine)
        fine_len = _codelength(indptr, indices, weights, flow, fine, n_fine, node_term)
        if moves == 0 or fine_len >= cur - MIN_GAIN:
            best_len = cur
            break
        labels = fine
        best_len = fine_len
    return labels, best_len


def _normalized(n, edges):
    """CSR with edge flows ``1/2W`` per direction and node visit rates."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    if len(edges):
        edges = np.unique(np.sort(edges, axis=1), axis=0)
    heads = np.concatenate([edges[:, 0], edges[:, 1]])
    tails = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((tails, heads))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
    two_w = 2.0 * len(edges)
    w = np.full(len(heads), 1.0 / two_w) if two_w else np.zeros(0)
    flow = np.diff(indptr) / two_w if two_w else np.zeros(n)
    node_term = float(sum(_plogp(x) for x in flow))
    return indptr, tails[order], w, flow, node_term


def codelength(n: int, edges, labels) -> float:
    """Two-level codelength in bits of ``labels`` on an unweighted graph.

    A graph without edges has codelength 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != n:
        raise ValueError("partition must cover every node")
    if n and labels.min() < 0:
        raise ValueError("module labels must be non-negative")
    indptr, indices, w, flow, node_term = _normalized(n, edges)
    if len(indices) == 0:
        return 0.0
    labels, n_mod = _relabel(labels) if n else (labels, 0)
    return max(float(_codelength(indptr, indices, w, flow, labels, n_mod, node_term)), 0.0)


def optimize_partition(n: int, edges, seed: int = 0, trials: int = DEFAULT_TRIALS,
                       max_rounds: int = 20) -> tuple[np.ndarray, float]:
    """Search for the partition with minimal two-level codelength.

    Returns ``(labels, codelength)``; labels are numbered in order of first
    occurrence.  Isolated nodes stay in their own modules.  The result is
    never worse than the one-module or all-singleton partitions.
    """
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    indptr, indices, w, flow, node_term = _normalized(n, edges)
    if len(indices) == 0:
        return np.arange(n, dtype=np.int64), 0.0
    seeds = np.random.SeedSequence(seed).generate_state(max(trials, 1))
    best_labels, best_len = None, np.inf
    for s in seeds:
        labels, length = _trial(indptr, indices, w, flow, node_term, np.uint32(s), max_rounds)
        if length < best_len - MIN_GAIN:
            best_labels, best_len = labels, length
    # one module for every connected node; isolated nodes alone
    lone = np.diff(indptr) == 0
    one = np.where(lone, np.cumsum(lone), 0)
    one, n_one = _relabel(one)
    one_len = _codelength(indptr, indices, w, flow, one, n_one, node_term)
    if one_len < best_len - MIN_GAIN:
        best_labels, best_len = one, one_len
    return np.asarray(best_labels, dtype=np.int64), max(float(best_len), 0.0)


# --------------------------------------------------------------------------
# ego-level API


@dataclass(frozen=True)
class CommunityAssignment:
    """Partition of an ego's alters into egocentric communities.

    ``labels[p]`` is the community of the alter at appearance position
    ``p``.  Communities are numbered by the appearance of their first
    member, so alter 0 is always in community 0.
    """

    ego: int
    labels: np.ndarray
    codelength: float
    seed: int = 0
    include_ego: bool = False

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def communities(self) -> list[np.ndarray]:
        """Local alter positions per community, ascending."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(np.bincount(self.labels, minlength=self.n_communities))[:-1]
        return np.split(order, bounds)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_communities)


def ego_seed(global_seed: int, ego: int) -> int:
    """Per-ego seed, independent of scheduling order."""
    return int(np.random.SeedSequence([int(global_seed) & 0xFFFFFFFF, int(ego)]).generate_state(1)[0])


def ego_subgraph(net: EgoNetwork, include_ego: bool = False) -> tuple[int, np.ndarray]:
    """Node count and edge list of the graph searched for communities.

    Alters keep their local positions; the ego, when included, is node ``k``.
    """
    k = net.degree
    edges = np.asarray(net.edges, dtype=np.int64).reshape(-1, 2)
    if not include_ego:
        return k, edges
    spokes = np.stack([np.full(k, k, dtype=np.int64), np.arange(k, dtype=np.int64)], axis=1)
    return k + 1, np.concatenate([edges, spokes])


def detect_communities(net: EgoNetwork, seed: int = 0, trials: int = DEFAULT_TRIALS,
                       include_ego: bool = False) -> CommunityAssignment:
    """Egocentric communities of ``net`` by map-equation minimization.

    By default the search runs on the alter-alter graph.  With
    ``include_ego`` the ego and its spokes take part and the ego is deleted
    from its module afterwards.  Alters without any edge in the searched
    graph end up as single-member communities.
    """
    if net.is_empty:
        raise ValueError(f"ego {net.ego} has no alters")
    n, edges = ego_subgraph(net, include_ego)
    labels, length = optimize_partition(n, edges, seed=seed, trials=trials)
    labels, _ = _relabel(labels[:net.degree])
    return CommunityAssignment(net.ego, labels, length, seed, include_ego)


def community_size_histogram(assignments: Iterable[CommunityAssignment]) -> dict[int, int]:
    """Community sizes pooled over egos, as ``{size: count}`` sorted by size."""
    counts = Counter()
    for asg in assignments:
        counts.update(asg.sizes.tolist())
    return dict(sorted(counts.items()))
