"""Descriptor value types shared by all parsers.

A descriptor value is one of ``str``, ``int``, ``float`` or
:class:`fractions.Fraction` (rationals such as frame rates). Field names
follow the probe-report vocabulary (``codec_name``, ``width``, ...), so the
native parsers and report ingestion feed the same feature codec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from ..errors import InvalidRecord

DescriptorValue = Union[str, int, float, Fraction]

STREAM_KINDS = ("video", "audio", "subtitle", "data")


def sanitize_text(raw) -> str:
    if isinstance(raw, (bytes, bytearray, memoryview)):
        return bytes(raw).decode("utf-8", errors="replace")
    return str(raw).encode("utf-8", errors="replace").decode("utf-8")


def check_value(value) -> DescriptorValue:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, (bytes, bytearray, str)):
        return sanitize_text(value)
    raise InvalidRecord(f"unsupported descriptor value type {type(value).__name__}")


def value_text(value: DescriptorValue) -> str:
    """Probe-report text form of a value (rationals as ``num/den``)."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_number(value: DescriptorValue) -> float | None:
    """Numeric reading of a value, or None when it is not a finite number."""
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, Fraction):
        x = float(value)
    else:
        text = value.strip()
        if "/" in text:
            num, _, den = text.partition("/")
            try:
                n, d = float(num), float(den)
            except ValueError:
                return None
            if d == 0:
                return None
            x = n / d
        else:
            try:
                x = float(text)
            except ValueError:
                return None
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class StreamDescriptor:
    kind: str
    index: int
    fields: Mapping[str, DescriptorValue] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise InvalidRecord(f"unknown stream kind {self.kind!r}")
        if self.index < 0:
            raise InvalidRecord(f"negative stream index {self.index}")
        object.__setattr__(self, "fields", dict(self.fields))


@dataclass(frozen=True)
class DescriptorRecord:
    """All descriptor fields extracted from one video."""

    source_id: str
    container_fields: Mapping[str, DescriptorValue]
    streams: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "container_fields", dict(self.container_fields))
        object.__setattr__(self, "streams", tuple(self.streams))
        for i, stream in enumerate(self.streams):
            if stream.index != i:
                raise InvalidRecord(f"stream indices must be dense from 0, got {stream.index} at {i}")
        n = self.container_fields.get("nb_streams")
        if n is not None and parse_number(n) is not None and parse_number(n) != len(self.streams):
            raise InvalidRecord(f"nb_streams={n} but {len(self.streams)} streams parsed")
        d = self.container_fields.get("duration")
        if d is not None and parse_number(d) is not None and parse_number(d) < 0:
            raise InvalidRecord(f"negative duration {d}")

    @property
    def format_name(self):
        return self.container_fields.get("format_name")

    @property
    def duration_seconds(self) -> float | None:
        d = self.container_fields.get("duration")
        return None if d is None else parse_number(d)

    @property
    def byte_size(self) -> int | None:
        s = self.container_fields.get("size")
        x = None if s is None else parse_number(s)
        return None if x is None else int(x)

    @property
    def overall_bit_rate(self) -> float | None:
        b = self.container_fields.get("bit_rate")
        return None if b is None else parse_number(b)

    @property
    def stream_count(self) -> int:
        return len(self.streams)

    def to_report(self) -> dict:
        """Probe-report document (``{"streams": [...], "format": {...}}``)."""
        streams = []
        for s in self.streams:
            entry = {"index": s.index, "codec_type": s.kind}
            entry.update(_nest_tags(s.fields))
            streams.append(entry)
        return {"streams": streams, "format": _nest_tags(self.container_fields)}


def _nest_tags(fields):
    out = {}
    tags = {}
    for name, value in fields.items():
        if isinstance(value, Fraction):
            value = value_text(value)
        if name.startswith("tags."):
            tags[name[5:]] = value
        else:
            out[name] = value
    if tags:
        out["tags"] = tags
    return out
