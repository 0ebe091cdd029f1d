"""Feature schema, trait values and the pairwise overlap kernels.

A profile holds one trait per schema feature.  Categorical traits match by
exact token equality; numeric traits match when their absolute difference is
within the feature tolerance.  The link overlap of two users is the fraction
of their mutually available features on which they match.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "MISSING",
    "FeatureDef",
    "FeatureSchema",
    "Profile",
    "SchemaError",
    "age_in_years",
    "link_overlap",
    "link_overlaps",
    "normalize_token",
    "subset_overlap",
    "trait_match",
]

CATEGORICAL = "cat"
NUMERIC = "num"

# Absorbs binary rounding so that e.g. 24.1 vs 25.1 matches at tolerance 1.
_TOL_SLACK = 1e-9


class SchemaError(ValueError):
    """Invalid feature schema or profile layout."""


class _Missing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()

TraitValue = Union[str, float, _Missing]


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    tolerance: float | None = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise SchemaError("feature name must be a non-empty string")
        if self.kind == CATEGORICAL:
            if self.tolerance is not None:
                raise SchemaError(f"categorical feature {self.name!r} cannot have a tolerance")
        elif self.kind == NUMERIC:
            if self.tolerance is None:
                raise SchemaError(f"numeric feature {self.name!r} needs a tolerance")
            tol = float(self.tolerance)
            if not math.isfinite(tol) or tol < 0:
                raise SchemaError(f"tolerance of {self.name!r} must be a finite non-negative number")
            object.__setattr__(self, "tolerance", tol)
        else:
            raise SchemaError(f"unknown feature kind {self.kind!r} (expected 'cat' or 'num')")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def parse(self, raw) -> TraitValue:
        """Convert a raw cell into a trait value; empty cells become MISSING."""
        if raw is None or raw is MISSING:
            return MISSING
        if isinstance(raw, float) and math.isnan(raw):
            return MISSING
        if self.kind == CATEGORICAL:
            token = normalize_token(str(raw))
            return token if token else MISSING
        if isinstance(raw, str):
            raw = raw.strip()
            if not raw:
                return MISSING
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"non-finite numeric trait for {self.name!r}: {raw!r}")
        return value


class FeatureSchema(Sequence[FeatureDef]):
    """Ordered, name-unique collection of feature definitions."""

    def __init__(self, features: Iterable[FeatureDef]):
        self._features = tuple(features)
        names = [f.name for f in self._features]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in schema: {names}")
        self._index = {name: i for i, name in enumerate(names)}

    def __getitem__(self, i):
        return self._features[i]

    def __len__(self) -> int:
        return len(self._features)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self._features == other._features

    def __hash__(self) -> int:
        return hash(self._features)

    def __repr__(self) -> str:
        return f"FeatureSchema({list(self._features)!r})"

    @property
    def names(self) -> list[str]:
        return [f.name for f in self._features]

    def index(self, name: str) -> int:
        return self._index[name]

    def tolerances(self) -> np.ndarray:
        return np.array([f.tolerance if f.is_numeric else 0.0 for f in self._features])

    def numeric_mask(self) -> np.ndarray:
        return np.array([f.is_numeric for f in self._features], dtype=bool)

    def to_json(self) -> list[dict]:
        out = []
        for f in self._features:
            entry = {"name": f.name, "kind": f.kind}
            if f.is_numeric:
                entry["tolerance"] = f.tolerance
            out.append(entry)
        return out

    @classmethod
    def from_json(cls, data: list[dict]) -> "FeatureSchema":
        if not isinstance(data, list):
            raise SchemaError("schema JSON must be an array of feature objects")
        feats = []
        for entry in data:
            try:
                feats.append(FeatureDef(entry["name"], entry["kind"], entry.get("tolerance")))
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"malformed schema entry {entry!r}") from exc
        return cls(feats)

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


@dataclass(frozen=True)
class Profile:
    """One user's traits, aligned to a schema."""

    user: int
    traits: tuple

    @classmethod
    def from_raw(cls, user, raw: Sequence, schema: FeatureSchema) -> "Profile":
        if len(raw) != len(schema):
            raise SchemaError(f"profile of user {user} has {len(raw)} traits, schema has {len(schema)}")
        return cls(user, tuple(f.parse(v) for f, v in zip(schema, raw)))

    @classmethod
    def empty(cls, user, schema: FeatureSchema) -> "Profile":
        return cls(user, (MISSING,) * len(schema))


def normalize_token(token: str) -> str:
    return token.strip()


def age_in_years(birth: date, on: date) -> int:
    """Whole years elapsed between a birth date and a reference date."""
    years = on.year - birth.year
    if (on.month, on.day) < (birth.month, birth.day):
        years -= 1
    return years


def trait_match(feature: FeatureDef, a: TraitValue, b: TraitValue) -> int:
    """Return 1 if two traits match under ``feature``'s rule, else 0."""
    if a is MISSING or b is MISSING:
        raise ValueError(
            f"trait_match called with MISSING for {feature.name!r}; "
            "filter to shared features first"
        )
    if feature.is_numeric:
        return int(abs(float(a) - float(b)) <= feature.tolerance + _TOL_SLACK)
    return int(a == b)


def link_overlap(i: Profile, j: Profile, schema: FeatureSchema) -> tuple[float | None, int]:
    """Fraction of shared features on which two profiles match.

    Returns ``(overlap, n_shared)``.  When the users share no available
    feature the overlap is ``None`` and the pair must be excluded.
    """
    shared = 0
    matches = 0
    for f, a, b in zip(schema, i.traits, j.traits):
        if a is MISSING or b is MISSING:
            continue
        shared += 1
        matches += trait_match(f, a, b)
    if shared == 0:
        return None, 0
    return matches / shared, shared


def subset_overlap(ego: Profile, subset: Iterable[Profile], schema: FeatureSchema) -> float | None:
    """Mean link overlap between an ego and a group of alters.

    Alters sharing no feature with the ego are dropped; ``None`` signals that
    nothing was left to average.
    """
    values = [o for o, _ in (link_overlap(ego, j, schema) for j in subset) if o is not None]
    if not values:
        return None
    return math.fsum(values) / len(values)


def link_overlaps(
    ego_values: np.ndarray,
    ego_present: np.ndarray,
    values: np.ndarray,
    present: np.ndarray,
    schema: FeatureSchema,
) -> np.ndarray:
    """Vectorized link overlap of one ego against many users.

    ``values``/``present`` are ``(n, F)`` arrays holding numeric traits or
    categorical codes and their availability mask.  Pairs with no shared
    feature come back as NaN.
    """
    values = np.asarray(values, dtype=float)
    present = np.asarray(present, dtype=bool)
    both = present & ego_present[None, :]
    diff = np.abs(values - ego_values[None, :])
    tol = np.where(schema.numeric_mask(), schema.tolerances() + _TOL_SLACK, 0.0)
    hit = (diff <= tol[None, :]) & both
    shared = both.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = hit.sum(axis=1) / shared
    out[shared == 0] = np.nan
    return out
