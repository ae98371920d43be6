"""Probe-report ingestion (JSON documents shaped like ffprobe's
``-show_streams -show_format`` output)."""

from __future__ import annotations

import json

from ..errors import MalformedDocument, MissingStreams
from .record import STREAM_KINDS, DescriptorRecord, StreamDescriptor, check_value


def _flatten(obj, prefix=""):
    out = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{name}."))
        elif isinstance(value, list) or value is None:
            continue
        else:
            out[name] = check_value(value)
    return out


def load_report(text):
    if isinstance(text, (bytes, bytearray, memoryview)):
        text = bytes(text).decode("utf-8", errors="replace")
    try:
        doc = json.loads(text)
    except (ValueError, RecursionError) as exc:
        raise MalformedDocument(f"probe report is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("probe report must be a JSON object")
    return doc


def parse_probe_report(text, source_id="<report>") -> DescriptorRecord:
    """Ingest a probe report.

    Every scalar under a stream object becomes a stream field and every
    scalar under ``format`` a container field; nested objects such as
    ``tags`` are flattened with a dotted prefix. Numbers that arrive as
    strings stay strings.
    """
    doc = load_report(text)
    if "streams" not in doc:
        raise MissingStreams("probe report has no 'streams' key")
    streams_doc = doc["streams"]
    fmt = doc.get("format", {})
    if not isinstance(streams_doc, list) or not isinstance(fmt, dict):
        raise MalformedDocument("'streams' must be a list and 'format' an object")
    streams = []
    for i, entry in enumerate(streams_doc):
        if not isinstance(entry, dict):
            raise MalformedDocument(f"stream {i} is not an object")
        fields = _flatten(entry)
        fields.pop("index", None)
        kind = fields.get("codec_type")
        if kind not in STREAM_KINDS:
            kind = "data"
        streams.append(StreamDescriptor(kind=kind, index=i, fields=fields))
    return DescriptorRecord(source_id=source_id, container_fields=_flatten(fmt), streams=streams)
