"""Native Matroska / WebM descriptor parser.

Walks ``Segment/Info`` and ``Segment/Tracks/TrackEntry``; all other elements
(clusters, cues, tags, vendor elements) are skipped by size.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction

from ..errors import MalformedVarint, TruncatedElement
from .record import DescriptorRecord, StreamDescriptor, sanitize_text

FORMAT_NAME = "matroska,webm"

EBML = 0x1A45DFA3
DOC_TYPE = 0x4282
SEGMENT = 0x18538067
INFO = 0x1549A966
TIMESTAMP_SCALE = 0x2AD7B1
DURATION = 0x4489
MUXING_APP = 0x4D80
WRITING_APP = 0x5741
TRACKS = 0x1654AE6B
TRACK_ENTRY = 0xAE
TRACK_TYPE = 0x83
CODEC_ID = 0x86
DEFAULT_DURATION = 0x23E383
VIDEO = 0xE0
PIXEL_WIDTH = 0xB0
PIXEL_HEIGHT = 0xBA
AUDIO = 0xE1
SAMPLING_FREQUENCY = 0xB5
CHANNELS = 0x9F
CLUSTER = 0x1F43B675

TRACK_KINDS = {1: "video", 2: "audio", 17: "subtitle"}


def read_vint(data, pos, end, keep_marker=False):
    """Decode one EBML variable-length integer.

    Returns ``(value, next_pos, unknown)`` where ``unknown`` flags the
    all-ones "unknown size" encoding. IDs are read with ``keep_marker=True``.
    """
    if pos >= end:
        raise TruncatedElement("varint starts past the end of its parent", pos)
    first = data[pos]
    if first == 0:
        raise MalformedVarint("varint length descriptor is zero", pos)
    length = 9 - first.bit_length()
    if pos + length > end:
        raise TruncatedElement(f"{length}-byte varint is cut off", pos)
    raw = int.from_bytes(data[pos:pos + length], "big")
    if keep_marker:
        return raw, pos + length, False
    value = raw & ((1 << (7 * length)) - 1)
    return value, pos + length, value == (1 << (7 * length)) - 1


def iter_elements(data, start, end):
    """Yield ``(element_id, payload_start, payload_end, unknown_size)``."""
    pos = start
    while pos < end:
        element_id, pos_size, _ = read_vint(data, pos, end, keep_marker=True)
        if pos_size - pos > 4:
            raise MalformedVarint("element ID longer than 4 bytes", pos)
        size, payload, unknown = read_vint(data, pos_size, end)
        if unknown:
            size = end - payload
        elif payload + size > end:
            raise TruncatedElement(
                f"element 0x{element_id:X} declares {size} bytes but only {end - payload} remain", pos)
        yield element_id, payload, payload + size, unknown
        pos = payload + size


def _uint(data, s, e):
    return int.from_bytes(data[s:e], "big")


def _float(data, s, e):
    if e - s == 4:
        return struct.unpack_from(">f", data, s)[0]
    if e - s == 8:
        return struct.unpack_from(">d", data, s)[0]
    return 0.0 if e == s else None


def _number(x):
    return int(x) if float(x).is_integer() else x


def _parse_track(data, start, end, index):
    track_type = None
    codec = None
    default_duration = None
    video = {}
    audio = {}
    for eid, s, e, _ in iter_elements(data, start, end):
        if eid == TRACK_TYPE:
            track_type = _uint(data, s, e)
        elif eid == CODEC_ID:
            codec = sanitize_text(bytes(data[s:e]).rstrip(b"\x00"))
        elif eid == DEFAULT_DURATION:
            default_duration = _uint(data, s, e)
        elif eid == VIDEO:
            for cid, cs, ce, _ in iter_elements(data, s, e):
                if cid == PIXEL_WIDTH:
                    video["width"] = _uint(data, cs, ce)
                elif cid == PIXEL_HEIGHT:
                    video["height"] = _uint(data, cs, ce)
        elif eid == AUDIO:
            for cid, cs, ce, _ in iter_elements(data, s, e):
                if cid == SAMPLING_FREQUENCY:
                    rate = _float(data, cs, ce)
                    if rate is not None and math.isfinite(rate) and rate >= 0:
                        audio["sample_rate"] = _number(rate)
                elif cid == CHANNELS:
                    audio["channels"] = _uint(data, cs, ce)
    kind = TRACK_KINDS.get(track_type, "data")
    fields = {"codec_type": kind}
    if codec is not None:
        fields["codec_name"] = codec
    if kind == "video":
        fields.update(video)
        if default_duration:
            fields["avg_frame_rate"] = Fraction(1_000_000_000, default_duration)
    elif kind == "audio":
        fields.update(audio)
    return StreamDescriptor(kind=kind, index=index, fields=fields)


def parse_matroska(data, source_id="<bytes>") -> DescriptorRecord:
    """Parse a Matroska/WebM byte string into a :class:`DescriptorRecord`."""
    data = memoryview(bytes(data))
    end = len(data)
    container = {"format_name": FORMAT_NAME}
    streams = []
    timestamp_scale = 1_000_000
    duration = None
    encoder = None
    for eid, s, e, _ in iter_elements(data, 0, end):
        if eid == EBML:
            for cid, cs, ce, _ in iter_elements(data, s, e):
                if cid == DOC_TYPE:
                    container["tags.doctype"] = sanitize_text(bytes(data[cs:ce]).rstrip(b"\x00"))
        elif eid == SEGMENT:
            for cid, cs, ce, _ in iter_elements(data, s, e):
                if cid == INFO:
                    for iid, is_, ie, _ in iter_elements(data, cs, ce):
                        if iid == TIMESTAMP_SCALE:
                            timestamp_scale = _uint(data, is_, ie)
                        elif iid == DURATION:
                            duration = _float(data, is_, ie)
                        elif iid == MUXING_APP:
                            encoder = sanitize_text(bytes(data[is_:ie]).rstrip(b"\x00"))
                elif cid == TRACKS:
                    for tid, ts, te, _ in iter_elements(data, cs, ce):
                        if tid == TRACK_ENTRY:
                            streams.append(_parse_track(data, ts, te, len(streams)))

    if duration is not None and math.isfinite(duration) and duration >= 0:
        seconds = duration * timestamp_scale / 1e9
        if math.isfinite(seconds):
            container["duration"] = seconds
    container["size"] = end
    if container.get("duration"):
        bit_rate = end * 8 / container["duration"]
        if math.isfinite(bit_rate):
            container["bit_rate"] = int(bit_rate)
    container["nb_streams"] = len(streams)
    if encoder is not None:
        container["tags.encoder"] = encoder
    return DescriptorRecord(source_id=source_id, container_fields=container, streams=streams)
