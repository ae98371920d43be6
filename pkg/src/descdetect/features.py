"""Feature codec: descriptor records to fixed-length real vectors.

Numeric features are divided by their training median, categorical features
get one integer code per category (lexicographic order), and any missing
field or unseen category is imputed with a fixed sentinel. Fields never seen
during fitting are dropped at encoding time, so vector length is a property
of the schema alone.

The sentinel (-1.0) sits outside the natural range of ratio-scaled,
non-negative descriptors. Features that are legitimately negative can
collide with it; that is accepted, not prevented.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyTrainingSet, SchemaVersionMismatch
from .extract.record import DescriptorRecord, DescriptorValue, parse_number, value_text

SENTINEL = -1.0
SCHEMA_VERSION = 1
NUMERIC_THRESHOLD = 0.9
ZERO_MEDIAN_GUARD = 1e-12

STREAM_FIELDS = (
    "codec_name", "codec_type", "profile", "level", "width", "height", "pix_fmt",
    "avg_frame_rate", "bit_rate", "sample_rate", "channels", "nb_frames", "duration",
)
FORMAT_FIELDS = ("format_name", "duration", "size", "bit_rate", "nb_streams", "tags.encoder")
FEATURE_KINDS = ("video", "audio")
COUNTED_KINDS = ("video", "audio", "subtitle", "data")

RawFeatureMap = Mapping[str, DescriptorValue]


def flatten(record: DescriptorRecord) -> dict:
    """Map a record to ``scope.field`` names, keeping only canonical fields.

    Streams are numbered within their kind (``video0``, ``video1``,
    ``audio0``...). Subtitle and data streams contribute only to the
    ``format.n_<kind>_streams`` counters.
    """
    out = {}
    for name in FORMAT_FIELDS:
        if name in record.container_fields:
            out[f"format.{name}"] = record.container_fields[name]
    counts = Counter()
    for stream in record.streams:
        k = counts[stream.kind]
        counts[stream.kind] += 1
        if stream.kind not in FEATURE_KINDS:
            continue
        for name in STREAM_FIELDS:
            if name in stream.fields:
                out[f"{stream.kind}{k}.{name}"] = stream.fields[name]
    for kind in COUNTED_KINDS:
        out[f"format.n_{kind}_streams"] = counts[kind]
    return out


def canonical_value(value: DescriptorValue):
    """Comparable form of a value: finite numbers become floats rounded to
    1e-9, everything else its text form."""
    x = parse_number(value)
    if x is None:
        return value_text(value)
    return round(x, 9) + 0.0


def canonical_dump(record: DescriptorRecord) -> str:
    """Stable JSON text of the canonical fields, used for golden comparisons."""
    flat = {k: canonical_value(v) for k, v in flatten(record).items()}
    return json.dumps(flat, indent=1, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class FeatureVector:
    schema_version: int
    values: tuple

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class FeatureSchema:
    """Learned encoding contract."""

    features: tuple                      # (name, kind) pairs, kind in {"numeric", "categorical"}
    medians: Mapping[str, float] = field(default_factory=dict)
    categories: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    sentinel: float = SENTINEL
    version: int = SCHEMA_VERSION

    def __len__(self):
        return len(self.features)

    @property
    def names(self):
        return [name for name, _ in self.features]

    def encode(self, raw: RawFeatureMap) -> FeatureVector:
        return encode(self, raw)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "sentinel": self.sentinel,
            "features": [
                {"name": name, "kind": kind, "median": self.medians[name]} if kind == "numeric"
                else {"name": name, "kind": kind, "categories": dict(sorted(self.categories[name].items()))}
                for name, kind in self.features
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        if doc.get("version") != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"schema version {doc.get('version')!r} is not supported (expected {SCHEMA_VERSION})")
        features, medians, categories = [], {}, {}
        for entry in doc["features"]:
            features.append((entry["name"], entry["kind"]))
            if entry["kind"] == "numeric":
                medians[entry["name"]] = float(entry["median"])
            else:
                categories[entry["name"]] = {k: float(v) for k, v in entry["categories"].items()}
        return cls(tuple(features), medians, categories, float(doc["sentinel"]), doc["version"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FeatureSchema":
        return cls.from_dict(json.loads(text))


def median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def fit_schema(maps: Sequence[RawFeatureMap]) -> FeatureSchema:
    """Learn feature order, numeric medians and categorical code tables."""
    if not maps:
        raise EmptyTrainingSet("cannot fit a feature schema on zero records")
    seen = {}
    for raw in maps:
        for name, value in raw.items():
            seen.setdefault(name, []).append(value)

    features, medians, categories = [], {}, {}
    for name in sorted(seen):
        values = seen[name]
        parsed = [x for x in map(parse_number, values) if x is not None]
        if parsed and len(parsed) >= NUMERIC_THRESHOLD * len(values):
            features.append((name, "numeric"))
            medians[name] = median(parsed)
        else:
            features.append((name, "categorical"))
            labels = sorted({value_text(v) for v in values})
            categories[name] = {label: float(code) for code, label in enumerate(labels)}
    return FeatureSchema(tuple(features), medians, categories)


def encode(schema: FeatureSchema, raw: RawFeatureMap) -> FeatureVector:
    """Encode one feature map in schema order. Total: never raises."""
    out = []
    for name, kind in schema.features:
        value = raw.get(name)
        if value is None:
            out.append(schema.sentinel)
        elif kind == "numeric":
            x = parse_number(value)
            if x is None:
                out.append(schema.sentinel)
                continue
            m = schema.medians[name]
            if abs(m) > ZERO_MEDIAN_GUARD:
                x = x / m
            out.append(x if math.isfinite(x) else schema.sentinel)
        else:
            out.append(schema.categories[name].get(value_text(value), schema.sentinel))
    return FeatureVector(schema.version, tuple(out))


def encode_many(schema: FeatureSchema, maps: Sequence[RawFeatureMap]) -> np.ndarray:
    if not maps:
        return np.zeros((0, len(schema)))
    return np.array([encode(schema, m).values for m in maps], dtype=np.float64)
