"""Native ISOBMFF (MP4/MOV family) descriptor parser.

Only the boxes that carry stream descriptors are decoded::

    ftyp
    moov/mvhd
    moov/trak/tkhd
    moov/trak/mdia/{mdhd, hdlr}
    moov/trak/mdia/minf/stbl/{stsd, stsz, stts}
    moov/udta/meta/ilst/(c)too        (encoder tag)

Everything else is skipped by its declared size.
"""

from __future__ import annotations

import struct
from fractions import Fraction

from ..errors import MissingMoov, TruncatedBox
from .record import DescriptorRecord, StreamDescriptor, sanitize_text

FORMAT_NAME = "mov,mp4,m4a,3gp,3g2,mj2"

HANDLER_KINDS = {
    b"vide": "video",
    b"soun": "audio",
    b"sbtl": "subtitle",
    b"subt": "subtitle",
    b"text": "subtitle",
}

AVC_PROFILES = {
    66: "Baseline",
    77: "Main",
    88: "Extended",
    100: "High",
    110: "High 10",
    122: "High 4:2:2",
    244: "High 4:4:4 Predictive",
}
HEVC_PROFILES = {1: "Main", 2: "Main 10", 3: "Main Still Picture", 4: "Rext"}
AAC_PROFILES = {1: "Main", 2: "LC", 3: "SSR", 4: "LTP", 5: "HE-AAC", 23: "LD", 29: "HE-AACv2", 39: "ELD"}

# Byte length of the fixed part of visual / audio sample entries, after the box header.
VISUAL_ENTRY_LEN = 78
AUDIO_ENTRY_LEN = 28


def iter_boxes(data, start, end):
    """Yield ``(type, payload_start, box_end, box_start)`` for boxes in ``data[start:end]``."""
    pos = start
    while pos < end:
        if end - pos < 8:
            raise TruncatedBox(f"box header needs 8 bytes, {end - pos} remain", pos)
        size, = struct.unpack_from(">I", data, pos)
        kind = bytes(data[pos + 4:pos + 8])
        header = 8
        if size == 1:
            if end - pos < 16:
                raise TruncatedBox("64-bit box size field is cut off", pos)
            size, = struct.unpack_from(">Q", data, pos + 8)
            header = 16
        elif size == 0:
            size = end - pos
        if size < header:
            raise TruncatedBox(f"box {kind!r} declares size {size} smaller than its header", pos)
        if pos + size > end:
            raise TruncatedBox(
                f"box {kind!r} declares {size} bytes but only {end - pos} remain", pos)
        yield kind, pos + header, pos + size, pos
        pos += size


def _children(data, start, end):
    return {kind: (s, e) for kind, s, e, _ in iter_boxes(data, start, end)}


def _unpack(fmt, data, offset, end):
    n = struct.calcsize(fmt)
    if offset + n > end:
        raise TruncatedBox(f"field needs {n} bytes, {max(end - offset, 0)} remain", offset)
    return struct.unpack_from(fmt, data, offset)


def _timing(data, start, end):
    """(timescale, duration) from an mvhd/mdhd full box."""
    version, = _unpack(">B", data, start, end)
    if version == 1:
        timescale, duration = _unpack(">IQ", data, start + 20, end)
    else:
        timescale, duration = _unpack(">II", data, start + 12, end)
    return timescale, duration


def _tkhd_size(data, start, end):
    version, = _unpack(">B", data, start, end)
    offset = start + (88 if version == 1 else 76)
    width, height = _unpack(">II", data, offset, end)
    return width >> 16, height >> 16


def _sample_sizes(data, start, end):
    sample_size, count = _unpack(">II", data, start + 4, end)
    if sample_size:
        return count, sample_size * count
    table = start + 12
    if table + 4 * count > end:
        raise TruncatedBox(f"stsz lists {count} entries past the box end", table)
    total = sum(struct.unpack_from(f">{count}I", data, table)) if count else 0
    return count, total


def _stts_count(data, start, end):
    entries, = _unpack(">I", data, start + 4, end)
    table = start + 8
    if table + 8 * entries > end:
        raise TruncatedBox(f"stts lists {entries} entries past the box end", table)
    values = struct.unpack_from(f">{2 * entries}I", data, table) if entries else ()
    return sum(values[0::2])


def _descriptor_len(data, pos, end):
    length = 0
    for _ in range(4):
        b, = _unpack(">B", data, pos, end)
        pos += 1
        length = (length << 7) | (b & 0x7F)
        if not b & 0x80:
            break
    return length, pos


def _esds_object_type(data, start, end):
    """AAC audio object type from an esds box, or None."""
    pos = start + 4
    while pos < end:
        tag, = _unpack(">B", data, pos, end)
        length, body = _descriptor_len(data, pos + 1, end)
        if tag == 0x03:
            flags, = _unpack(">B", data, body + 2, end)
            pos = body + 3
            if flags & 0x80:
                pos += 2
            if flags & 0x40:
                url_len, = _unpack(">B", data, pos, end)
                pos += 1 + url_len
            if flags & 0x20:
                pos += 2
        elif tag == 0x04:
            pos = body + 13
        elif tag == 0x05:
            b0, = _unpack(">B", data, body, end)
            aot = b0 >> 3
            if aot == 31:
                b1, = _unpack(">B", data, body + 1, end)
                aot = 32 + (((b0 & 0x07) << 3) | (b1 >> 5))
            return aot
        else:
            pos = body + length
    return None


def _sample_entry(data, start, end, kind, fields):
    entries = list(iter_boxes(data, start + 8, end))
    if not entries:
        return
    fourcc, s, e, _ = entries[0]
    fields["codec_name"] = sanitize_text(fourcc)
    child_start = None
    if kind == "video":
        width, height = _unpack(">HH", data, s + 24, e)
        fields["width"] = width
        fields["height"] = height
        child_start = s + VISUAL_ENTRY_LEN
    elif kind == "audio":
        version, = _unpack(">H", data, s + 8, e)
        channels, = _unpack(">H", data, s + 16, e)
        rate, = _unpack(">I", data, s + 24, e)
        fields["channels"] = channels
        fields["sample_rate"] = rate >> 16
        child_start = s + AUDIO_ENTRY_LEN + (16 if version == 1 else 0)
    if child_start is None or child_start >= e:
        return
    for ckind, cs, ce, _ in iter_boxes(data, child_start, e):
        if ckind == b"avcC":
            profile, _, level = _unpack(">BBB", data, cs + 1, ce)
            fields["profile"] = AVC_PROFILES.get(profile, str(profile))
            fields["level"] = level
        elif ckind == b"hvcC":
            b1, = _unpack(">B", data, cs + 1, ce)
            level, = _unpack(">B", data, cs + 12, ce)
            fields["profile"] = HEVC_PROFILES.get(b1 & 0x1F, str(b1 & 0x1F))
            fields["level"] = level
        elif ckind == b"esds":
            aot = _esds_object_type(data, cs, ce)
            if aot is not None:
                fields["profile"] = AAC_PROFILES.get(aot, str(aot))


def _parse_trak(data, start, end, index):
    boxes = _children(data, start, end)
    mdia = _children(data, *boxes[b"mdia"]) if b"mdia" in boxes else {}
    kind = "data"
    if b"hdlr" in mdia:
        s, e = mdia[b"hdlr"]
        kind = HANDLER_KINDS.get(_unpack(">4s", data, s + 8, e)[0], "data")
    fields = {"codec_type": kind}
    timescale = duration = 0
    if b"mdhd" in mdia:
        timescale, duration = _timing(data, *mdia[b"mdhd"])

    sample_count = sample_bytes = None
    minf = _children(data, *mdia[b"minf"]) if b"minf" in mdia else {}
    stbl = _children(data, *minf[b"stbl"]) if b"stbl" in minf else {}
    if b"stsd" in stbl:
        _sample_entry(data, *stbl[b"stsd"], kind, fields)
    if b"stsz" in stbl:
        sample_count, sample_bytes = _sample_sizes(data, *stbl[b"stsz"])
    if b"stts" in stbl:
        stts_count = _stts_count(data, *stbl[b"stts"])
        if sample_count is None:
            sample_count = stts_count

    if kind == "video" and "width" not in fields and b"tkhd" in boxes:
        fields["width"], fields["height"] = _tkhd_size(data, *boxes[b"tkhd"])
    seconds = duration / timescale if timescale else None
    if sample_count is not None:
        fields["nb_frames"] = sample_count
    if seconds:
        if kind == "video" and sample_count is not None:
            fields["avg_frame_rate"] = Fraction(sample_count * timescale, duration)
        if sample_bytes is not None:
            fields["bit_rate"] = int(sample_bytes * 8 / seconds)
    if seconds is not None:
        fields["duration"] = seconds
    return StreamDescriptor(kind=kind, index=index, fields=fields)


def _encoder_tag(data, start, end):
    udta = _children(data, start, end)
    if b"meta" not in udta:
        return None
    s, e = udta[b"meta"]
    meta = _children(data, s + 4, e)
    if b"ilst" not in meta:
        return None
    ilst = _children(data, *meta[b"ilst"])
    item = ilst.get(b"\xa9too")
    if item is None:
        return None
    values = _children(data, *item)
    if b"data" not in values:
        return None
    s, e = values[b"data"]
    return sanitize_text(data[s + 8:e]) if s + 8 <= e else None


def parse_isobmff(data, source_id="<bytes>") -> DescriptorRecord:
    """Parse an MP4/MOV byte string into a :class:`DescriptorRecord`.

    Raises :class:`TruncatedBox` when a declared size overruns its parent and
    :class:`MissingMoov` when no movie box exists.
    """
    data = memoryview(bytes(data))
    end = len(data)
    top = {}
    for kind, s, e, _ in iter_boxes(data, 0, end):
        top.setdefault(kind, (s, e))
    if b"moov" not in top:
        raise MissingMoov("no moov box found", end)

    container = {"format_name": FORMAT_NAME}
    if b"ftyp" in top:
        s, e = top[b"ftyp"]
        brand, minor = _unpack(">4sI", data, s, e)
        container["tags.major_brand"] = sanitize_text(brand)
        container["tags.minor_version"] = str(minor)

    streams = []
    movie_seconds = None
    tags = {}
    for kind, s, e, _ in iter_boxes(data, *top[b"moov"]):
        if kind == b"mvhd":
            timescale, duration = _timing(data, s, e)
            if timescale:
                movie_seconds = duration / timescale
        elif kind == b"trak":
            streams.append(_parse_trak(data, s, e, len(streams)))
        elif kind == b"udta":
            encoder = _encoder_tag(data, s, e)
            if encoder is not None:
                tags["tags.encoder"] = encoder

    if movie_seconds is not None:
        container["duration"] = movie_seconds
    container["size"] = end
    if movie_seconds:
        container["bit_rate"] = int(end * 8 / movie_seconds)
    container["nb_streams"] = len(streams)
    container.update(tags)
    return DescriptorRecord(source_id=source_id, container_fields=container, streams=streams)
