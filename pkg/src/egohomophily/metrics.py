"""Binned overlap curves over community size, ego degree and appearance order."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import EgoNetwork, ProfileTable, PseudoTimeError
from .features import link_overlaps

__all__ = [
    "BinnedCurve",
    "CurveAccumulator",
    "appearance_order_curve",
    "appearance_order_samples",
    "community_overlap_curve",
    "community_overlap_samples",
    "ego_link_overlaps",
    "ego_overlap_curve",
    "ego_overlap_sample",
]

CSV_COLUMNS = ("bin", "mean", "count", "stderr")


@dataclass(frozen=True)
class BinnedCurve:
    """Per-bin mean, count and standard error; empty bins are omitted."""

    bins: np.ndarray
    mean: np.ndarray
    count: np.ndarray
    stderr: np.ndarray

    def __len__(self) -> int:
        return len(self.bins)

    def __getitem__(self, b: int) -> tuple[float, int, float]:
        i = np.searchsorted(self.bins, b)
        if i >= len(self.bins) or self.bins[i] != b:
            raise KeyError(b)
        return float(self.mean[i]), int(self.count[i]), float(self.stderr[i])

    def __contains__(self, b) -> bool:
        i = np.searchsorted(self.bins, b)
        return bool(i < len(self.bins) and self.bins[i] == b)

    def as_dict(self) -> dict[int, tuple[float, int, float]]:
        return {int(b): self[b] for b in self.bins}

    @property
    def low_count(self) -> np.ndarray:
        """Bins backed by a single observation (their stderr is reported as 0)."""
        return self.bins[self.count < 2]

    @classmethod
    def from_moments(cls, bins, sums, sq, counts) -> "BinnedCurve":
        bins = np.asarray(bins, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        keep = counts > 0
        bins, sums, sq, counts = bins[keep], np.asarray(sums)[keep], np.asarray(sq)[keep], counts[keep]
        mean = sums / counts
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(counts > 1, (sq - counts * mean ** 2) / (counts - 1), 0.0)
        var = np.maximum(var, 0.0)
        return cls(bins, mean, counts, np.sqrt(var / counts))

    @classmethod
    def from_samples(cls, bins, values) -> "BinnedCurve":
        """Aggregate ``values`` by integer ``bins``; NaN values are dropped."""
        bins = np.asarray(bins, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        ok = ~np.isnan(values)
        bins, values = bins[ok], values[ok]
        if len(bins) == 0:
            z = np.zeros(0)
            return cls(np.zeros(0, dtype=np.int64), z, np.zeros(0, dtype=np.int64), z)
        order = np.argsort(bins, kind="stable")
        bins, values = bins[order], values[order]
        labels, start, counts = np.unique(bins, return_index=True, return_counts=True)
        mean = np.add.reduceat(values, start) / counts
        dev = values - np.repeat(mean, counts)
        ss = np.add.reduceat(dev ** 2, start)
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(counts > 1, ss / np.maximum(counts - 1, 1), 0.0)
        return cls(labels, mean, counts, np.sqrt(var / counts))

    def to_csv(self, fh=None, header_lines: Sequence[str] = ()) -> str | None:
        """Write ``bin,mean,count,stderr``; ``header_lines`` become ``#`` comments."""
        buf = io.StringIO() if fh is None else fh
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for b, m, c, s in zip(self.bins, self.mean, self.count, self.stderr):
            w.writerow([int(b), repr(float(m)), int(c), repr(float(s))])
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text_or_fh) -> "BinnedCurve":
        text = text_or_fh if isinstance(text_or_fh, str) else text_or_fh.read()
        rows = [r for r in csv.reader(l for l in text.splitlines() if l and not l.startswith("#"))]
        if not rows or tuple(rows[0][:4]) != CSV_COLUMNS:
            raise ValueError("not a binned-curve CSV")
        rows = [r for r in rows[1:] if r[0].lstrip("-").isdigit()]
        return cls(np.array([int(r[0]) for r in rows], dtype=np.int64),
                   np.array([float(r[1]) for r in rows]),
                   np.array([int(r[2]) for r in rows], dtype=np.int64),
                   np.array([float(r[3]) for r in rows]))


class CurveAccumulator:
    """Collects (bin, value) observations; merged deterministically in add order."""

    def __init__(self):
        self._bins: list[np.ndarray] = []
        self._values: list[np.ndarray] = []

    def add(self, bins, values) -> None:
        self._bins.append(np.atleast_1d(np.asarray(bins, dtype=np.int64)))
        self._values.append(np.atleast_1d(np.asarray(values, dtype=float)))

    def extend(self, other: "CurveAccumulator") -> None:
        self._bins.extend(other._bins)
        self._values.extend(other._values)

    def curve(self) -> BinnedCurve:
        if not self._bins:
            return BinnedCurve.from_samples([], [])
        return BinnedCurve.from_samples(np.concatenate(self._bins), np.concatenate(self._values))


# --------------------------------------------------------------------------
# per-ego samples


def ego_link_overlaps(profiles: ProfileTable, net: EgoNetwork) -> np.ndarray:
    """Link overlap between the ego and each alter, in appearance order.

    NaN marks alters sharing no available feature with the ego.
    """
    e = net.ego
    return link_overlaps(profiles.values[e], profiles.present[e],
                         profiles.values[net.alters], profiles.present[net.alters],
                         profiles.schema)


def _group_means(labels: np.ndarray, o: np.ndarray, n_groups: int):
    ok = ~np.isnan(o)
    sums = np.bincount(labels[ok], weights=o[ok], minlength=n_groups)
    cnt = np.bincount(labels[ok], minlength=n_groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, sums / np.maximum(cnt, 1), np.nan)


def community_overlap_samples(asg, o: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(size, subset overlap) for each community of one ego; NaN if undefined."""
    sizes = asg.sizes
    return sizes, _group_means(asg.labels, o, len(sizes))


def ego_overlap_sample(o: np.ndarray) -> float:
    """Subset overlap of the whole alter set (NaN if undefined)."""
    ok = ~np.isnan(o)
    return float(o[ok].mean()) if ok.any() else float("nan")


def appearance_order_samples(asg, o: np.ndarray, s: int | None = None):
    """(size, within-community rank n, overlap) for each alter.

    Ranks follow the global appearance order restricted to the community.
    Communities of size 1 are skipped; ``s`` restricts to one size.
    """
    labels = asg.labels
    sizes = asg.sizes
    order = np.argsort(labels, kind="stable")  # stable keeps appearance order
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    rank = np.empty(len(labels), dtype=np.int64)
    rank[order] = np.arange(len(labels)) - np.repeat(starts, sizes) + 1
    size_of = sizes[labels]
    keep = size_of >= 2 if s is None else size_of == s
    return size_of[keep], rank[keep], o[keep]


def _require_true_time(nets: Iterable[EgoNetwork]):
    for net in nets:
        if net.pseudo_time:
            raise PseudoTimeError(
                "appearance order needs true timestamps; the graph was ingested with pseudo-time"
            )
        yield net


# --------------------------------------------------------------------------
# curves


def community_overlap_curve(nets: Sequence[EgoNetwork], assignments: Sequence,
                            profiles: ProfileTable) -> BinnedCurve:
    """Mean subset overlap of communities binned by community size."""
    acc = CurveAccumulator()
    for net, asg in zip(nets, assignments, strict=True):
        acc.add(*community_overlap_samples(asg, ego_link_overlaps(profiles, net)))
    return acc.curve()


def ego_overlap_curve(nets: Sequence[EgoNetwork], profiles: ProfileTable) -> BinnedCurve:
    """Mean subset overlap over all alters, binned by ego degree."""
    acc = CurveAccumulator()
    for net in nets:
        if net.is_empty:
            continue
        acc.add(net.degree, ego_overlap_sample(ego_link_overlaps(profiles, net)))
    return acc.curve()


def appearance_order_curve(nets: Sequence[EgoNetwork], assignments: Sequence,
                           profiles: ProfileTable, s: int) -> BinnedCurve:
    """Mean link overlap of the n-th appearing member of size-``s`` communities."""
    if s < 2:
        raise ValueError("appearance-order curves are defined for community sizes >= 2")
    acc = CurveAccumulator()
    for net, asg in zip(_require_true_time(nets), assignments, strict=True):
        _, rank, o = appearance_order_samples(asg, ego_link_overlaps(profiles, net), s)
        acc.add(rank, o)
    return acc.curve()
