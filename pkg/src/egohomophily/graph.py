"""Immutable social graph with timestamped edges, profiles and ego extraction.

Nodes are external integer ids, relabelled to ``0..N-1`` in ascending id
order so that ties in appearance order broken "by id" are the same as ties
broken by internal index.  Adjacency is a CSR pair (``indptr``, ``indices``)
with a parallel ``times`` array carrying each edge's creation time.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from .features import MISSING, FeatureSchema, Profile, SchemaError, age_in_years, normalize_token

__all__ = [
    "SECONDS_PER_YEAR",
    "EgoFilter",
    "EgoNetwork",
    "IngestError",
    "IngestReport",
    "ProfileTable",
    "PseudoTimeError",
    "SocialGraph",
    "build_graph",
    "extract_ego_network",
    "filter_egos",
    "ingest_edges",
    "ingest_profiles",
    "load_store",
    "read_edges_csv",
    "read_profiles_csv",
    "save_store",
]

log = logging.getLogger(__name__)

SECONDS_PER_YEAR = 365.25 * 86400
STORE_FORMAT = "egohomophily-store/1"


class IngestError(ValueError):
    """Input records could not be ingested."""


class PseudoTimeError(ValueError):
    """An order-dependent statistic was requested on pseudo-time data."""


@dataclass
class IngestReport:
    records: int = 0
    self_loops: int = 0
    duplicates: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)
    pseudo_time: bool = False


# --------------------------------------------------------------------------
# profiles


class ProfileTable:
    """Column store of traits for the graph's nodes.

    ``values`` is ``(N, F)`` float: numeric traits, or category codes for
    categorical features.  ``present`` is the explicit availability mask;
    entries where it is False carry no meaning.
    """

    def __init__(self, schema: FeatureSchema, values: np.ndarray, present: np.ndarray,
                 categories: list[list[str]] | None = None):
        values = np.asarray(values, dtype=float)
        present = np.asarray(present, dtype=bool)
        if values.shape != present.shape or values.ndim != 2 or values.shape[1] != len(schema):
            raise SchemaError("profile arrays do not match the schema")
        self.schema = schema
        self.values = values
        self.present = present
        self.categories = categories or [[] for _ in schema]
        self.values.setflags(write=False)
        self.present.setflags(write=False)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def empty(cls, schema: FeatureSchema, n: int) -> "ProfileTable":
        return cls(schema, np.zeros((n, len(schema))), np.zeros((n, len(schema)), dtype=bool))

    def availability(self) -> dict[str, float]:
        """Percentage of rows carrying each feature."""
        if len(self) == 0:
            return {name: 0.0 for name in self.schema.names}
        pct = 100.0 * self.present.mean(axis=0)
        return dict(zip(self.schema.names, pct.tolist()))

    def profile(self, row: int, user=None) -> Profile:
        traits = []
        for f, feat in enumerate(self.schema):
            if not self.present[row, f]:
                traits.append(MISSING)
            elif feat.is_numeric:
                traits.append(float(self.values[row, f]))
            else:
                traits.append(self.categories[f][int(self.values[row, f])])
        return Profile(row if user is None else user, tuple(traits))

    def align(self, ids: np.ndarray, node_ids: np.ndarray) -> "ProfileTable":
        """Reorder rows keyed by ``ids`` onto ``node_ids``; unknown nodes are all-MISSING."""
        ids = np.asarray(ids, dtype=np.int64)
        node_ids = np.asarray(node_ids, dtype=np.int64)
        n, F = len(node_ids), len(self.schema)
        values = np.zeros((n, F))
        present = np.zeros((n, F), dtype=bool)
        if len(ids):
            order = np.argsort(ids, kind="stable")
            pos = np.minimum(np.searchsorted(ids[order], node_ids), len(ids) - 1)
            found = ids[order][pos] == node_ids
            src = order[pos[found]]
            values[found] = self.values[src]
            present[found] = self.present[src]
        return ProfileTable(self.schema, values, present, self.categories)


def _parse_numeric(feat, raw: str, reference: date | None) -> float:
    raw = raw.strip()
    if reference is not None and len(raw) == 10 and raw[4] == "-" and raw[7] == "-":
        return float(age_in_years(date.fromisoformat(raw), reference))
    return float(feat.parse(raw))


def ingest_profiles(records: Iterable[Iterable[str]], schema: FeatureSchema, *,
                    header: list[str] | None = None,
                    age_reference: date | None = None) -> tuple[np.ndarray, ProfileTable]:
    """Build a profile table from ``(id, trait...)`` rows.

    ``header`` names the columns (first must be ``id``); columns are matched
    to schema features by name.  Empty cells become MISSING.  ISO birth dates
    in numeric columns are turned into whole-year ages at ``age_reference``.
    Returns the user ids (row order) and the table.
    """
    names = schema.names
    header = header or ["id"] + names
    if header[0].strip() != "id" or sorted(h.strip() for h in header[1:]) != sorted(names):
        raise SchemaError(f"profile header {header} does not match schema features {names}")
    col_of = [header.index(name) for name in names]
    ids = []
    rows_vals, rows_present = [], []
    cat_codes: list[dict[str, int]] = [{} for _ in schema]
    for lineno, rec in enumerate(records, start=2):
        rec = list(rec)
        if len(rec) != len(header):
            raise IngestError(f"profiles line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            ids.append(int(rec[0]))
        except ValueError as exc:
            raise IngestError(f"profiles line {lineno}: bad user id {rec[0]!r}") from exc
        vals = np.zeros(len(schema))
        pres = np.zeros(len(schema), dtype=bool)
        for f, feat in enumerate(schema):
            raw = rec[col_of[f]]
            if raw is None or not str(raw).strip():
                continue
            try:
                if feat.is_numeric:
                    vals[f] = _parse_numeric(feat, str(raw), age_reference)
                else:
                    token = normalize_token(str(raw))
                    vals[f] = cat_codes[f].setdefault(token, len(cat_codes[f]))
            except ValueError as exc:
                raise IngestError(f"profiles line {lineno}: bad value {raw!r} for {feat.name!r}") from exc
            pres[f] = True
        rows_vals.append(vals)
        rows_present.append(pres)
    F = len(schema)
    values = np.array(rows_vals).reshape(-1, F)
    present = np.array(rows_present, dtype=bool).reshape(-1, F)
    ids = np.array(ids, dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise IngestError("duplicate user ids in profiles")
    categories = [list(codes) for codes in cat_codes]
    return ids, ProfileTable(schema, values, present, categories)


def _data_lines(fh) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(fh, start=1):
        if line.startswith("#") or not line.strip():
            continue
        yield lineno, line


def read_profiles_csv(path, schema: FeatureSchema, age_reference: date | None = None):
    """Read ``profiles.csv`` (header ``id,<feature>...``; ``#`` lines skipped)."""
    with open(path, newline="") as fh:
        lines = (line for _, line in _data_lines(fh))
        reader = csv.reader(lines)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty profiles file") from None
        return ingest_profiles(reader, schema, header=header, age_reference=age_reference)


# --------------------------------------------------------------------------
# edges and graph


class SocialGraph:
    """Undirected, simple graph in CSR form with per-edge creation times."""

    def __init__(self, node_ids, indptr, indices, times, *, pseudo_time: bool = False,
                 profiles: ProfileTable | None = None):
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int32 if len(node_ids) < 2**31 else np.int64)
        self.times = np.asarray(times, dtype=np.int64)
        self.pseudo_time = bool(pseudo_time)
        self.profiles = profiles
        for arr in (self.node_ids, self.indptr, self.indices, self.times):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node]:self.indptr[node + 1]]

    def node_index(self, ext_id) -> int:
        i = int(np.searchsorted(self.node_ids, ext_id))
        if i >= len(self.node_ids) or self.node_ids[i] != ext_id:
            raise KeyError(f"unknown node id {ext_id}")
        return i

    def node_indices(self, ext_ids) -> np.ndarray:
        ext_ids = np.asarray(ext_ids, dtype=np.int64)
        idx = np.searchsorted(self.node_ids, ext_ids)
        bad = (idx >= len(self.node_ids)) | (self.node_ids[np.minimum(idx, len(self.node_ids) - 1)] != ext_ids)
        if bad.any():
            raise KeyError(f"unknown node ids {ext_ids[bad][:5].tolist()}")
        return idx

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once as (u, v, t) with u < v (internal indices)."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degrees())
        keep = src < self.indices
        return src[keep], self.indices[keep].astype(np.int64), self.times[keep]

    def with_profiles(self, profiles: ProfileTable) -> "SocialGraph":
        if len(profiles) != self.n_nodes:
            raise SchemaError("profile table is not aligned with the graph nodes")
        return SocialGraph(self.node_ids, self.indptr, self.indices, self.times,
                           pseudo_time=self.pseudo_time, profiles=profiles)


def build_graph(src, dst, times=None, report: IngestReport | None = None) -> SocialGraph:
    """Assemble a :class:`SocialGraph` from parallel edge arrays.

    Self-loops are dropped and duplicate undirected pairs collapse onto the
    earliest timestamp.  Without ``times`` the record position (1-based)
    serves as pseudo-time and the graph is flagged accordingly.
    """
    report = report if report is not None else IngestReport()
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    pseudo = times is None
    if pseudo:
        times = np.arange(1, len(src) + 1, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    report.records += len(src)
    report.pseudo_time = pseudo

    loops = src == dst
    if loops.any():
        report.self_loops += int(loops.sum())
        log.warning("dropped %d self-loop record(s)", int(loops.sum()))
        src, dst, times = src[~loops], dst[~loops], times[~loops]

    node_ids = np.unique(np.concatenate([src, dst]))
    u = np.searchsorted(node_ids, np.minimum(src, dst))
    v = np.searchsorted(node_ids, np.maximum(src, dst))
    order = np.lexsort((times, v, u))
    u, v, times = u[order], v[order], times[order]
    first = np.ones(len(u), dtype=bool)
    first[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    report.duplicates += int((~first).sum())
    u, v, times = u[first], v[first], times[first]

    n = len(node_ids)
    heads = np.concatenate([u, v])
    tails = np.concatenate([v, u])
    ts = np.concatenate([times, times])
    order = np.lexsort((tails, heads))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
    return SocialGraph(node_ids, indptr, tails[order], ts[order], pseudo_time=pseudo)


def ingest_edges(records: Iterable, *, max_errors: int = 100,
                 report: IngestReport | None = None) -> SocialGraph:
    """Build a graph from ``(src, dst[, ts])`` records.

    Records may be tuples or raw CSV lines.  Malformed records are rejected
    with their 1-based position; more than ``max_errors`` rejections abort.
    If any record lacks a timestamp the whole graph falls back to
    pseudo-time (record position).
    """
    report = report if report is not None else IngestReport()
    src, dst, ts = [], [], []
    has_all_ts = True
    for lineno, rec in enumerate(records, start=1):
        if isinstance(rec, str):
            rec = rec.strip().split(",")
        try:
            fields = list(rec)
            if len(fields) not in (2, 3):
                raise ValueError(f"expected 2 or 3 fields, got {len(fields)}")
            s, d = int(fields[0]), int(fields[1])
            t = fields[2] if len(fields) == 3 else None
            if isinstance(t, str):
                t = t.strip() or None
            t = None if t is None else int(t)
        except (ValueError, TypeError) as exc:
            report.rejected.append((lineno, str(exc)))
            log.warning("rejected edge record %d: %s", lineno, exc)
            if len(report.rejected) > max_errors:
                raise IngestError(
                    f"more than {max_errors} malformed edge records (last at line {lineno})"
                ) from exc
            continue
        src.append(s)
        dst.append(d)
        if t is None:
            has_all_ts = False
            ts.append(0)
        else:
            ts.append(t)
    return build_graph(src, dst, ts if has_all_ts else None, report=report)


def read_edges_csv(path, *, max_errors: int = 100,
                   report: IngestReport | None = None) -> SocialGraph:
    """Read ``edges.csv`` (header ``src,dst[,ts]``; ``#`` lines skipped).

    Well-formed files go through a vectorized parser; anything else falls
    back to the line-by-line path for per-line diagnostics.
    """
    report = report if report is not None else IngestReport()
    try:
        df = pd.read_csv(path, comment="#", dtype={"src": np.int64, "dst": np.int64}, engine="c")
        if list(df.columns[:2]) != ["src", "dst"] or len(df.columns) > 3:
            raise ValueError("bad header")
        times = None
        if "ts" in df.columns:
            col = df["ts"]
            if col.notna().all():
                times = col.to_numpy(dtype=np.int64)
                if not np.array_equal(times, col.to_numpy()):
                    raise ValueError("non-integer timestamps")
        return build_graph(df["src"].to_numpy(), df["dst"].to_numpy(), times, report=report)
    except (ValueError, TypeError, pd.errors.ParserError):
        pass
    with open(path, newline="") as fh:
        lines = _data_lines(fh)
        try:
            hlineno, header = next(lines)
        except StopIteration:
            raise IngestError(f"{path}: empty edge file") from None
        cols = [c.strip() for c in header.split(",")]
        if cols[:2] != ["src", "dst"] or cols[2:] not in ([], ["ts"]):
            raise IngestError(f"{path}:{hlineno}: header must be src,dst[,ts], got {header.strip()!r}")
        numbered = list(lines)
    recs = [line for _, line in numbered]
    sub = IngestReport()
    graph = ingest_edges(recs, max_errors=max_errors, report=sub)
    report.records += sub.records
    report.self_loops += sub.self_loops
    report.duplicates += sub.duplicates
    report.pseudo_time = sub.pseudo_time
    # translate record positions back to file line numbers
    report.rejected.extend((numbered[i - 1][0], msg) for i, msg in sub.rejected)
    return graph


# --------------------------------------------------------------------------
# ego networks


@dataclass(frozen=True)
class EgoNetwork:
    """An ego, its alters in appearance order and the alter-alter edges.

    ``alters[p]`` is the internal index of the alter that appeared at
    position ``p`` (0-based), so local index == appearance rank - 1.
    ``edges`` holds induced alter-alter edges in local indices.
    """

    ego: int
    alters: np.ndarray
    times: np.ndarray
    edges: np.ndarray
    pseudo_time: bool = False

    @property
    def degree(self) -> int:
        return len(self.alters)

    @property
    def is_empty(self) -> bool:
        return len(self.alters) == 0

    def appearance_order(self) -> np.ndarray:
        """1-based appearance rank of each alter in local index order."""
        return np.arange(1, self.degree + 1)


def extract_ego_network(g: SocialGraph, ego: int) -> EgoNetwork:
    """Induced egocentric network of internal node ``ego``.

    Alters are ordered by the ego-alter edge time, ties by node id.  A
    degree-0 ego yields an empty network (``is_empty``).
    """
    lo, hi = g.indptr[ego], g.indptr[ego + 1]
    nbrs = g.indices[lo:hi].astype(np.int64)
    ts = g.times[lo:hi]
    order = np.lexsort((nbrs, ts))
    alters = nbrs[order]
    times = ts[order]
    k = len(alters)
    if k == 0:
        return EgoNetwork(ego, alters, times, np.empty((0, 2), dtype=np.int64), g.pseudo_time)

    starts = g.indptr[alters]
    lens = g.indptr[alters + 1] - starts
    offsets = np.cumsum(lens) - lens
    flat_idx = np.arange(lens.sum()) + np.repeat(starts - offsets, lens)
    flat = g.indices[flat_idx]
    owner = np.repeat(np.arange(k, dtype=np.int64), lens)
    # local position of each neighbour-of-alter, -1 if not an alter
    sorted_alters = np.sort(alters)
    pos_sorted = np.searchsorted(sorted_alters, flat)
    pos_sorted = np.minimum(pos_sorted, k - 1)
    is_alter = sorted_alters[pos_sorted] == flat
    local_of_sorted = np.empty(k, dtype=np.int64)
    local_of_sorted[np.searchsorted(sorted_alters, alters)] = np.arange(k)
    other = local_of_sorted[pos_sorted]
    keep = is_alter & (owner < other)
    edges = np.stack([owner[keep], other[keep]], axis=1)
    return EgoNetwork(ego, alters, times, edges, g.pseudo_time)


@dataclass(frozen=True)
class EgoFilter:
    """Ego selection: ``span >= min_span`` OR ``k_min <= degree <= k_max``.

    Either branch may be disabled by leaving it ``None``; with both disabled
    every node passes.  ``min_span`` is in timestamp units (seconds).
    """

    min_span: float | None = None
    k_min: int | None = None
    k_max: int | None = None

    def __post_init__(self):
        if (self.k_min is None) != (self.k_max is None):
            raise ValueError("degree interval needs both k_min and k_max")
        if self.k_min is not None and self.k_min > self.k_max:
            raise ValueError(f"empty degree interval [{self.k_min}, {self.k_max}]")

    @classmethod
    def long_lived_or_mid_degree(cls) -> "EgoFilter":
        """Active for seven years, or degree between 150 and 250."""
        return cls(min_span=7 * SECONDS_PER_YEAR, k_min=150, k_max=250)


def activity_spans(g: SocialGraph) -> np.ndarray:
    """Last minus first incident-edge time per node (0 for isolated nodes)."""
    deg = g.degrees()
    spans = np.zeros(g.n_nodes, dtype=np.int64)
    has = deg > 0
    if not has.any() or len(g.times) == 0:
        return spans
    starts = g.indptr[:-1][has]
    spans[has] = np.maximum.reduceat(g.times, starts) - np.minimum.reduceat(g.times, starts)
    return spans


def filter_egos(g: SocialGraph, f: EgoFilter) -> np.ndarray:
    """External ids of egos passing the filter, ascending."""
    if f.min_span is None and f.k_min is None:
        return g.node_ids.copy()
    keep = np.zeros(g.n_nodes, dtype=bool)
    if f.min_span is not None:
        if g.pseudo_time:
            raise PseudoTimeError("activity span needs real timestamps; this graph uses pseudo-time")
        keep |= activity_spans(g) >= f.min_span
    if f.k_min is not None:
        deg = g.degrees()
        keep |= (deg >= f.k_min) & (deg <= f.k_max)
    return g.node_ids[keep]


# --------------------------------------------------------------------------
# store


def save_store(g: SocialGraph, directory, manifest: dict | None = None) -> None:
    """Write the graph (and profiles, if any) to ``directory``.

    Layout: one ``.npy`` file per array (``node_ids``, ``indptr``,
    ``indices``, ``times`` and, with profiles, ``profile_values`` and
    ``profile_present``), ``schema.json``, and ``meta.json`` holding the
    format tag, flags, category tables and the producing manifest.  Files
    are written atomically and byte-reproducibly.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    arrays = {"node_ids": g.node_ids, "indptr": g.indptr, "indices": g.indices, "times": g.times}
    meta = {"format": STORE_FORMAT, "pseudo_time": g.pseudo_time,
            "n_nodes": g.n_nodes, "n_edges": g.n_edges}
    if g.profiles is not None:
        arrays["profile_values"] = g.profiles.values
        arrays["profile_present"] = g.profiles.present
        _atomic_text(d / "schema.json", json.dumps(g.profiles.schema.to_json(), indent=2) + "\n")
        meta["categories"] = g.profiles.categories
    for name, arr in arrays.items():
        _atomic_npy(d / f"{name}.npy", arr)
    if manifest is not None:
        meta["manifest"] = manifest
    _atomic_text(d / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_store(directory) -> SocialGraph:
    d = Path(directory)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except FileNotFoundError:
        raise IngestError(f"{d} is not a graph store (no meta.json)") from None
    if meta.get("format") != STORE_FORMAT:
        raise IngestError(f"{d}: unsupported store format {meta.get('format')!r}")
    arr = {name: np.load(d / f"{name}.npy") for name in ("node_ids", "indptr", "indices", "times")}
    g = SocialGraph(arr["node_ids"], arr["indptr"], arr["indices"], arr["times"],
                    pseudo_time=meta["pseudo_time"])
    if (d / "profile_values.npy").exists():
        schema = FeatureSchema.load(d / "schema.json")
        table = ProfileTable(schema, np.load(d / "profile_values.npy"),
                             np.load(d / "profile_present.npy"), meta.get("categories"))
        g = g.with_profiles(table)
    return g


def _atomic_npy(path: Path, arr: np.ndarray) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.save(fh, np.ascontiguousarray(arr))
    tmp.replace(path)


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
