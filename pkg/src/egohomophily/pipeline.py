"""Per-ego batch processing over a graph store.

Detection is embarrassingly parallel: egos are split into contiguous chunks,
processed by a fork-based worker pool and concatenated back in ego order, so
the output does not depend on the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .community import DEFAULT_TRIALS, CommunityAssignment, _relabel, detect_communities, ego_seed
from .graph import EgoNetwork, IngestError, PseudoTimeError, SocialGraph, extract_ego_network
from .metrics import (
    BinnedCurve,
    CurveAccumulator,
    appearance_order_samples,
    community_overlap_samples,
    ego_link_overlaps,
    ego_overlap_sample,
)
from .orderstats import FirstAppearanceSample, first_appearance_orders, pcm_distribution

__all__ = [
    "assignments_from_frame",
    "assignments_to_frame",
    "detect_all",
    "order_samples",
    "overlap_curve",
]

COMMUNITY_COLUMNS = ["ego", "alter", "community_index", "codelength"]

_GRAPH: SocialGraph | None = None


def _detect_chunk(args):
    egos, seed, trials, include_ego = args
    g = _GRAPH
    out = []
    for ego in egos:
        net = extract_ego_network(g, int(ego))
        if net.is_empty:
            continue
        out.append(detect_communities(net, seed=ego_seed(seed, g.node_ids[ego]),
                                      trials=trials, include_ego=include_ego))
    return out


def detect_all(g: SocialGraph, egos: Sequence[int], seed: int = 0, trials: int = DEFAULT_TRIALS,
               include_ego: bool = False, threads: int | None = None) -> list[CommunityAssignment]:
    """Detect communities for each internal ego index (isolated egos skipped).

    Each ego is seeded from ``(seed, external id)``.
    """
    global _GRAPH
    egos = np.asarray(egos, dtype=np.int64)
    threads = threads or os.cpu_count() or 1
    _GRAPH = g
    try:
        if threads <= 1 or len(egos) < 2:
            return _detect_chunk((egos, seed, trials, include_ego))
        chunks = np.array_split(egos, min(len(egos), threads * 8))
        import multiprocessing as mp
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
            parts = pool.map(_detect_chunk, [(c, seed, trials, include_ego) for c in chunks])
            return [a for part in parts for a in part]
    finally:
        _GRAPH = None


def assignments_to_frame(g: SocialGraph, assignments: Iterable[CommunityAssignment]) -> pd.DataFrame:
    """Rows (ego, alter, community_index, codelength) with external ids."""
    ego_col, alter_col, comm_col, len_col = [], [], [], []
    for asg in assignments:
        net = extract_ego_network(g, asg.ego)
        k = net.degree
        ego_col.append(np.full(k, g.node_ids[asg.ego]))
        alter_col.append(g.node_ids[net.alters])
        comm_col.append(asg.labels)
        len_col.append(np.full(k, asg.codelength))
    if not ego_col:
        return pd.DataFrame({c: pd.Series(dtype=t) for c, t in
                             zip(COMMUNITY_COLUMNS, ["int64", "int64", "int64", "float64"])})
    return pd.DataFrame({
        "ego": np.concatenate(ego_col),
        "alter": np.concatenate(alter_col),
        "community_index": np.concatenate(comm_col),
        "codelength": np.concatenate(len_col),
    })


def assignments_from_frame(g: SocialGraph, df: pd.DataFrame) -> list[tuple[EgoNetwork, CommunityAssignment]]:
    """Rebuild (ego network, assignment) pairs from a communities table.

    Every alter of each listed ego must be present; egos come back in
    ascending id order.
    """
    missing = set(COMMUNITY_COLUMNS) - set(df.columns)
    if missing:
        raise IngestError(f"communities table lacks columns {sorted(missing)}")
    df = df.sort_values(["ego", "alter"], kind="stable")
    ego_col = df["ego"].to_numpy(dtype=np.int64)
    alter_col = df["alter"].to_numpy(dtype=np.int64)
    label_col = df["community_index"].to_numpy(dtype=np.int64)
    length_col = df["codelength"].to_numpy(dtype=float)
    ego_ids, starts = np.unique(ego_col, return_index=True)
    stops = np.append(starts[1:], len(ego_col))
    out = []
    for ego_id, lo, hi in zip(ego_ids.tolist(), starts.tolist(), stops.tolist()):
        ego = g.node_index(ego_id)
        net = extract_ego_network(g, ego)
        alters = g.node_indices(alter_col[lo:hi])  # ascending, like the external ids
        if len(alters) != net.degree or not np.array_equal(alters, np.sort(net.alters)):
            raise IngestError(f"communities for ego {ego_id} do not cover its alters")
        # map stored labels onto appearance positions
        idx = np.searchsorted(alters, net.alters)
        labels, _ = _relabel(label_col[lo:hi][idx])
        out.append((net, CommunityAssignment(ego, labels, float(length_col[lo]))))
    return out


def overlap_curve(g: SocialGraph, pairs: Sequence[tuple[EgoNetwork, CommunityAssignment]],
                  curve: str, size: int | None = None) -> BinnedCurve:
    """One of the three overlap curves: ``s`` (size), ``k`` (degree), ``order``."""
    if g.profiles is None:
        raise IngestError("the store holds no profiles")
    if curve == "order":
        if size is None or size < 2:
            raise ValueError("--size S >= 2 is required for the order curve")
        if g.pseudo_time:
            raise PseudoTimeError(
                "appearance-order curve needs true timestamps; this store was ingested with pseudo-time"
            )
    elif curve not in ("s", "k"):
        raise ValueError(f"unknown curve {curve!r}")
    acc = CurveAccumulator()
    for net, asg in pairs:
        o = ego_link_overlaps(g.profiles, net)
        if curve == "s":
            acc.add(*community_overlap_samples(asg, o))
        elif curve == "k":
            acc.add(net.degree, ego_overlap_sample(o))
        else:
            _, rank, vals = appearance_order_samples(asg, o, size)
            acc.add(rank, vals)
    return acc.curve()


def order_samples(g: SocialGraph, pairs, c: int) -> list[FirstAppearanceSample]:
    if g.pseudo_time:
        raise PseudoTimeError("first-appearance orders need true timestamps; store uses pseudo-time")
    return [first_appearance_orders(net, asg) for net, asg in pairs if asg.n_communities == c]


def pcm_for(g: SocialGraph, pairs, c: int) -> BinnedCurve:
    return pcm_distribution(order_samples(g, pairs, c), c)
