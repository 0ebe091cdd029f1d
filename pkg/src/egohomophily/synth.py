"""Synthetic populations with planted egocentric communities.

Each focal ego owns private alters grouped into communities whose sizes
follow the truncated power law.  Alters join the ego in the order produced
by the random-community growth procedure, which fixes the edge timestamps.
Every feature of an alter matches the ego's trait with probability equal to
the model overlap of its community size and within-community order, so the
expected link overlap of each alter is known exactly and written to a truth
sidecar.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .features import FeatureDef, FeatureSchema
from .model import ModelConfig, OverlapModel, simulate_ego

__all__ = [
    "FeatureSpec",
    "Population",
    "SynthConfig",
    "SynthConfigError",
    "generate_population",
]


class SynthConfigError(ValueError):
    """Synthetic-population configuration is invalid or infeasible."""


@dataclass(frozen=True)
class FeatureSpec:
    """How one feature is generated.

    Categorical features draw from ``categories`` tokens; numeric ones draw
    integer egos' values in ``[low, high]``.  ``availability`` is the
    probability that a user discloses the feature.
    """

    name: str
    kind: str = "cat"
    categories: int = 10
    tolerance: float | None = None
    low: int = 18
    high: int = 70
    availability: float = 1.0

    def definition(self) -> FeatureDef:
        return FeatureDef(self.name, self.kind, self.tolerance if self.kind == "num" else None)


def _default_features() -> list[FeatureSpec]:
    # availability echoes an online social network's self-declared profiles
    return [
        FeatureSpec("age", "num", tolerance=2, low=14, high=80, availability=0.61),
        FeatureSpec("gender", "cat", categories=2, availability=1.0),
        FeatureSpec("location", "cat", categories=50, availability=0.89),
        FeatureSpec("education", "cat", categories=6, availability=0.53),
    ]


@dataclass(frozen=True)
class SynthConfig:
    n_egos: int = 1000
    k_real: int | tuple[int, int] = 150
    size_exponent: float = -1.5
    s_min: int = 2
    s_max: int = 100
    overlap: OverlapModel = field(default_factory=OverlapModel)
    features: tuple[FeatureSpec, ...] = field(default_factory=lambda: tuple(_default_features()))
    intra_density: float = 1.0
    inter_density: float = 0.0
    tick: int = 86400
    start_time: int = 1_000_000_000
    seed: int = 0

    def __post_init__(self):
        if self.n_egos < 1:
            raise SynthConfigError("n_egos must be >= 1")
        lo, hi = self.k_range
        if lo < 1 or hi < lo:
            raise SynthConfigError(f"bad k_real {self.k_real!r}")
        if self.s_min < 1 or self.s_max < self.s_min:
            raise SynthConfigError("need 1 <= s_min <= s_max")
        if not 0.0 < self.intra_density <= 1.0:
            raise SynthConfigError("intra_density must lie in (0, 1]")
        if not 0.0 <= self.inter_density <= 1.0:
            raise SynthConfigError("inter_density must lie in [0, 1]")
        if self.inter_density > self.intra_density:
            raise SynthConfigError("inter_density above intra_density plants no communities")
        if self.tick < 1:
            raise SynthConfigError("tick must be a positive number of seconds")
        if not self.features:
            raise SynthConfigError("at least one feature is required")
        s = np.arange(1, self.s_max + 1)
        probs = np.concatenate([self.overlap.base(s), self.overlap.base(s) + self.overlap.bump])
        if probs.min() < 0 or probs.max() > 1:
            raise SynthConfigError("overlap model yields match probabilities outside [0, 1]")
        for spec in self.features:
            if not 0.0 <= spec.availability <= 1.0:
                raise SynthConfigError(f"availability of {spec.name!r} outside [0, 1]")
            if spec.kind == "cat" and spec.categories < 2 and probs.min() < 1:
                raise SynthConfigError(f"{spec.name!r} needs >= 2 categories to produce mismatches")
            if spec.kind == "num" and (spec.tolerance is None or spec.high < spec.low):
                raise SynthConfigError(f"numeric feature {spec.name!r} needs a tolerance and low <= high")
        try:
            FeatureSchema([f.definition() for f in self.features])
        except ValueError as exc:
            raise SynthConfigError(str(exc)) from exc

    @property
    def k_range(self) -> tuple[int, int]:
        if isinstance(self.k_real, (tuple, list)):
            return int(self.k_real[0]), int(self.k_real[1])
        return int(self.k_real), int(self.k_real)

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema([f.definition() for f in self.features])

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SynthConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "overlap" in data:
                data["overlap"] = OverlapModel(**data["overlap"])
            if "features" in data:
                data["features"] = tuple(FeatureSpec(**f) for f in data["features"])
            if isinstance(data.get("k_real"), list):
                data["k_real"] = tuple(data["k_real"])
            return cls(**data)
        except TypeError as exc:
            raise SynthConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SynthConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise SynthConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Population:
    """Generated graph, profiles and planted ground truth (external ids)."""

    schema: FeatureSchema
    edges: pd.DataFrame
    profiles: pd.DataFrame
    truth: pd.DataFrame
    egos: np.ndarray

    def write(self, directory, header_lines=()) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, df in (("edges.csv", self.edges), ("profiles.csv", self.profiles),
                         ("truth.csv", self.truth)):
            path = d / name
            tmp = path.with_name(name + ".tmp")
            with open(tmp, "w", newline="") as fh:
                for line in header_lines:
                    fh.write(f"# {line}\n")
                df.to_csv(fh, index=False, lineterminator="\n")
            tmp.replace(path)
            paths[name] = path
        tmp = d / "schema.json.tmp"
        self.schema.save(tmp)
        tmp.replace(d / "schema.json")
        paths["schema.json"] = d / "schema.json"
        return paths


def _traits(spec: FeatureSpec, ego_value, match: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Alter traits that equal (match) or differ from the ego's value."""
    n = len(match)
    if spec.kind == "cat":
        other = rng.integers(0, spec.categories - 1, size=n)
        other = other + (other >= ego_value)  # skip the ego's category
        return np.where(match, ego_value, other)
    tol = int(np.floor(spec.tolerance))
    near = ego_value + rng.integers(-tol, tol + 1, size=n)
    gap = rng.integers(tol + 1, tol + 11, size=n)
    far = ego_value + np.where(rng.random(n) < 0.5, -gap, gap)
    return np.where(match, near, far)


def generate_population(cfg: SynthConfig) -> Population:
    """Generate egos, alters, timestamped edges, profiles and the truth table.

    Ego ``e`` uses the random stream seeded by ``(seed, e)``; ids are
    allocated in ego order so the output is bit-reproducible.
    """
    schema = cfg.schema
    lo, hi = cfg.k_range
    F = len(cfg.features)
    src, dst, ts = [], [], []
    ids, vals, pres = [], [], []
    t_ego, t_alter, t_label, t_rank, t_expect = [], [], [], [], []
    egos = np.empty(cfg.n_egos, dtype=np.int64)
    next_id = 0
    for e in range(cfg.n_egos):
        rng = np.random.default_rng([cfg.seed, e])
        k_real = int(rng.integers(lo, hi + 1))
        mcfg = ModelConfig(k_real=k_real, exponent=cfg.size_exponent, s_min=cfg.s_min,
                           s_max=cfg.s_max, overlap=cfg.overlap)
        grown = simulate_ego(mcfg, rng)
        k = len(grown.picks)
        ego_id = next_id
        alter_ids = next_id + 1 + rng.permutation(k)
        next_id += k + 1
        egos[e] = ego_id
        t0 = cfg.start_time + e
        times = t0 + cfg.tick * np.arange(1, k + 1, dtype=np.int64)
        expect = grown.overlaps

        src.append(np.full(k, ego_id))
        dst.append(alter_ids)
        ts.append(times)

        labels = grown.picks
        iu, ju = np.triu_indices(k, 1)
        same = labels[iu] == labels[ju]
        p = np.where(same, cfg.intra_density, cfg.inter_density)
        keep = rng.random(len(iu)) < p
        iu, ju = iu[keep], ju[keep]
        src.append(alter_ids[iu])
        dst.append(alter_ids[ju])
        ts.append(np.maximum(times[iu], times[ju]))

        user_vals = np.zeros((k + 1, F), dtype=np.int64)
        for f, spec in enumerate(cfg.features):
            if spec.kind == "cat":
                ego_value = int(rng.integers(0, spec.categories))
            else:
                ego_value = int(rng.integers(spec.low, spec.high + 1))
            user_vals[0, f] = ego_value
            user_vals[1:, f] = _traits(spec, ego_value, rng.random(k) < expect, rng)
        avail = np.array([s.availability for s in cfg.features])
        user_pres = rng.random((k + 1, F)) < avail[None, :]
        ids.append(np.concatenate([[ego_id], alter_ids]))
        vals.append(user_vals)
        pres.append(user_pres)

        t_ego.append(np.full(k, ego_id))
        t_alter.append(alter_ids)
        t_label.append(labels)
        t_rank.append(np.arange(1, k + 1))
        t_expect.append(expect)

    edges = pd.DataFrame({"src": np.concatenate(src), "dst": np.concatenate(dst),
                          "ts": np.concatenate(ts)})
    ids = np.concatenate(ids)
    vals = np.concatenate(vals)
    pres = np.concatenate(pres)
    cols = {"id": ids}
    for f, spec in enumerate(cfg.features):
        if spec.kind == "cat":
            col = np.char.add("v", vals[:, f].astype(str)).astype(object)
        else:
            col = vals[:, f].astype(str).astype(object)
        col[~pres[:, f]] = ""
        cols[spec.name] = col
    profiles = pd.DataFrame(cols)
    truth = pd.DataFrame({
        "ego": np.concatenate(t_ego),
        "alter": np.concatenate(t_alter),
        "community_label": np.concatenate(t_label),
        "accession_rank": np.concatenate(t_rank),
        "expected_overlap": np.concatenate(t_expect),
    })
    return Population(schema, edges, profiles, truth, egos)
