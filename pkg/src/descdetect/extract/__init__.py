"""Stream-descriptor extraction: native ISOBMFF and Matroska parsers plus
probe-report ingestion, all normalized to :class:`DescriptorRecord`."""

from __future__ import annotations

import json
import os

from ..errors import UnsupportedFormat
from .isobmff import parse_isobmff
from .matroska import parse_matroska
from .probe import parse_probe_report
from .record import DescriptorRecord, DescriptorValue, StreamDescriptor, parse_number, value_text

EBML_MAGIC = b"\x1a\x45\xdf\xa3"
SIDECAR_SUFFIX = ".probe"

__all__ = [
    "DescriptorRecord", "DescriptorValue", "StreamDescriptor", "detect_format", "extract",
    "parse_isobmff", "parse_matroska", "parse_probe_report", "parse_number", "value_text",
]


def detect_format(data: bytes) -> str:
    """Return one of ``isobmff``, ``matroska``, ``probe_report`` or ``unknown``."""
    data = bytes(data)
    if data[4:8] == b"ftyp":
        return "isobmff"
    if data[:4] == EBML_MAGIC:
        return "matroska"
    head = data.lstrip()[:1]
    if head == b"{":
        try:
            doc = json.loads(data.decode("utf-8", errors="replace"))
        except (ValueError, RecursionError):
            return "unknown"
        if isinstance(doc, dict) and "streams" in doc:
            return "probe_report"
    return "unknown"


def parse_bytes(data: bytes, source_id: str = "<bytes>") -> DescriptorRecord:
    kind = detect_format(data)
    if kind == "isobmff":
        return parse_isobmff(data, source_id)
    if kind == "matroska":
        return parse_matroska(data, source_id)
    if kind == "probe_report":
        return parse_probe_report(data, source_id)
    raise UnsupportedFormat(f"{source_id}: unrecognized container format")


def extract(path) -> DescriptorRecord:
    """Extract the descriptor record for the file at ``path``.

    Unknown binary formats fall back to a ``<path>.probe`` sidecar report.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    kind = detect_format(data)
    if kind == "unknown":
        sidecar = path + SIDECAR_SUFFIX
        if not os.path.exists(sidecar):
            raise UnsupportedFormat(f"{path}: unrecognized format and no {SIDECAR_SUFFIX} sidecar")
        with open(sidecar, "rb") as fh:
            return parse_probe_report(fh.read(), source_id=path)
    return parse_bytes(data, source_id=path)
