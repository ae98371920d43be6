"""Regenerate the checked-in container fixtures.

    python tests/fixtures/build_fixtures.py

Boxes and EBML elements are assembled by hand from the container layouts;
nothing here imports the package under test.
"""

import struct
from pathlib import Path

HERE = Path(__file__).parent


# -- ISOBMFF -----------------------------------------------------------------

def box(kind, *payload):
    body = b"".join(payload)
    return struct.pack(">I4s", 8 + len(body), kind) + body


def full_box(kind, version, flags, *payload):
    return box(kind, struct.pack(">I", (version << 24) | flags), *payload)


UNITY_MATRIX = struct.pack(">9I", 0x10000, 0, 0, 0, 0x10000, 0, 0, 0, 0x40000000)


def mvhd(timescale, duration, version=0):
    if version == 1:
        times = struct.pack(">QQIQ", 0, 0, timescale, duration)
    else:
        times = struct.pack(">IIII", 0, 0, timescale, duration)
    rest = struct.pack(">IH10x", 0x10000, 0x100) + UNITY_MATRIX + bytes(24) + struct.pack(">I", 3)
    return full_box(b"mvhd", version, 0, times, rest)


def tkhd(track_id, duration, width, height):
    return full_box(
        b"tkhd", 0, 3,
        struct.pack(">IIIII", 0, 0, track_id, 0, duration),
        bytes(8), struct.pack(">hhhH", 0, 0, 0, 0), UNITY_MATRIX,
        struct.pack(">II", width << 16, height << 16),
    )


def mdhd(timescale, duration):
    return full_box(b"mdhd", 0, 0, struct.pack(">IIIIHH", 0, 0, timescale, duration, 0x55C4, 0))


def hdlr(handler, name):
    return full_box(b"hdlr", 0, 0, struct.pack(">I4s12x", 0, handler), name + b"\x00")


def visual_entry(fourcc, width, height, *children):
    return box(
        fourcc,
        bytes(6), struct.pack(">H", 1), bytes(16),
        struct.pack(">HHIIIH", width, height, 0x480000, 0x480000, 0, 1),
        bytes(32), struct.pack(">Hh", 0x18, -1), *children,
    )


def audio_entry(fourcc, channels, rate, *children):
    return box(
        fourcc,
        bytes(6), struct.pack(">H", 1), bytes(8),
        struct.pack(">HHHHI", channels, 16, 0, 0, rate << 16), *children,
    )


def avcc(profile, level):
    return box(b"avcC", struct.pack(">BBBBB", 1, profile, 0, level, 0xFF), b"\xe0")


def hvcc(profile, level):
    return box(b"hvcC", struct.pack(">BB", 1, profile), bytes(4), bytes(6), struct.pack(">B", level), bytes(10))


def esds(object_type):
    asc = struct.pack(">H", (object_type << 11) | (4 << 7) | (2 << 3))
    dsi = b"\x05" + bytes([len(asc)]) + asc
    dcd_body = struct.pack(">BB", 0x40, 0x15) + b"\x00\x00\x00" + struct.pack(">II", 128000, 128000) + dsi
    dcd = b"\x04" + bytes([len(dcd_body)]) + dcd_body
    sl = b"\x06\x01\x02"
    es_body = struct.pack(">HB", 1, 0) + dcd + sl
    es = b"\x03" + bytes([len(es_body)]) + es_body
    return full_box(b"esds", 0, 0, es)


def stbl(entry, sample_size, sample_count, sizes=(), stts=()):
    stsd = full_box(b"stsd", 0, 0, struct.pack(">I", 1), entry)
    stsz = full_box(b"stsz", 0, 0, struct.pack(">II", sample_size, sample_count),
                    b"".join(struct.pack(">I", s) for s in sizes))
    stts_box = full_box(b"stts", 0, 0, struct.pack(">I", len(stts)),
                        b"".join(struct.pack(">II", c, d) for c, d in stts))
    return box(b"stbl", stsd, stts_box, stsz)


def trak(track_id, handler, timescale, duration, movie_duration, table, width=0, height=0):
    return box(
        b"trak",
        tkhd(track_id, movie_duration, width, height),
        box(b"mdia", mdhd(timescale, duration), hdlr(handler, b"handler"),
            box(b"minf", table)),
    )


def encoder_udta(encoder):
    data = box(b"data", struct.pack(">II", 1, 0), encoder)
    ilst = box(b"ilst", box(b"\xa9too", data))
    meta = full_box(b"meta", 0, 0, hdlr(b"mdir", b""), ilst)
    return box(b"udta", meta)


def ftyp(brand=b"isom", minor=512, compat=(b"isom", b"iso2", b"avc1", b"mp41")):
    return box(b"ftyp", brand, struct.pack(">I", minor), *compat)


def video_avc_mp4():
    table = stbl(visual_entry(b"avc1", 640, 480, avcc(100, 40)), 2000, 250, stts=[(250, 512)])
    moov = box(
        b"moov",
        mvhd(1000, 10000),
        trak(1, b"vide", 12800, 128000, 10000, table, 640, 480),
        encoder_udta(b"Lavf58.29.100"),
    )
    return ftyp() + moov + box(b"free") + box(b"mdat", bytes(64))


def audio_aac_m4a():
    sizes = [300, 310, 320, 330, 340]
    table = stbl(audio_entry(b"mp4a", 2, 44100, esds(2)), 0, len(sizes), sizes=sizes, stts=[(5, 44100)])
    moov = box(b"moov", mvhd(1000, 5000), trak(1, b"soun", 44100, 220500, 5000, table))
    return ftyp(b"M4A ", 0, (b"M4A ", b"isom", b"mp42")) + box(b"mdat", bytes(32)) + moov


def av_hevc_mp4():
    video = stbl(visual_entry(b"hvc1", 1920, 1080, hvcc(1, 120)), 4000, 300, stts=[(300, 1001)])
    audio = stbl(audio_entry(b"mp4a", 2, 48000, esds(2)), 0, 3, sizes=[400, 400, 400], stts=[(3, 1024)])
    moov = box(
        b"moov",
        mvhd(600, 6006, version=1),
        trak(1, b"vide", 30000, 300300, 6006, video, 1920, 1080),
        trak(2, b"soun", 48000, 3072, 6006, audio),
        box(b"uuid", bytes(16), b"vendor-payload"),
    )
    return ftyp(b"mp42", 1, (b"mp42", b"isom")) + moov + box(b"mdat", bytes(16))


# -- EBML / Matroska ---------------------------------------------------------

def vint_size(n):
    for length in range(1, 9):
        if n < (1 << (7 * length)) - 1:
            return ((1 << (7 * length)) | n).to_bytes(length, "big")
    raise ValueError(n)


def element(eid, payload):
    raw_id = eid.to_bytes((eid.bit_length() + 7) // 8, "big")
    return raw_id + vint_size(len(payload)) + payload


def uint_el(eid, n):
    return element(eid, n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big"))


def str_el(eid, text):
    return element(eid, text.encode())


def ebml_header(doctype):
    return element(0x1A45DFA3, uint_el(0x4286, 1) + uint_el(0x42F7, 1) + uint_el(0x42F2, 4)
                   + uint_el(0x42F3, 8) + str_el(0x4282, doctype) + uint_el(0x4287, 4) + uint_el(0x4285, 2))


UNKNOWN_SIZE = b"\x01\xff\xff\xff\xff\xff\xff\xff"


def vp8_webm():
    info = element(0x1549A966, uint_el(0x2AD7B1, 1_000_000) + element(0x4489, struct.pack(">d", 5000.0))
                   + str_el(0x4D80, "Lavf58.29.100") + str_el(0x5741, "Lavf58.29.100"))
    track = element(0xAE, uint_el(0xD7, 1) + uint_el(0x73C5, 1) + uint_el(0x83, 1) + str_el(0x86, "V_VP8")
                    + uint_el(0x23E383, 33_333_333) + element(0xE0, uint_el(0xB0, 320) + uint_el(0xBA, 240)))
    tracks = element(0x1654AE6B, track)
    cluster = element(0x1F43B675, uint_el(0xE7, 0) + element(0xA3, bytes(24)))
    segment = element(0x18538067, element(0xEC, bytes(8)) + info + tracks + cluster)
    return ebml_header("webm") + segment


def av_mkv():
    info = element(0x1549A966, uint_el(0x2AD7B1, 1_000_000) + element(0x4489, struct.pack(">f", 2500.0))
                   + str_el(0x4D80, "libebml v1.3.9 + libmatroska v1.5.2"))
    video = element(0xAE, uint_el(0xD7, 1) + uint_el(0x83, 1) + str_el(0x86, "V_MPEG4/ISO/AVC")
                    + uint_el(0x23E383, 40_000_000) + element(0x63A2, bytes(12))
                    + element(0xE0, uint_el(0xB0, 1280) + uint_el(0xBA, 720)))
    audio = element(0xAE, uint_el(0xD7, 2) + uint_el(0x83, 2) + str_el(0x86, "A_OPUS")
                    + element(0xE1, element(0xB5, struct.pack(">f", 48000.0)) + uint_el(0x9F, 2)))
    subs = element(0xAE, uint_el(0xD7, 3) + uint_el(0x83, 17) + str_el(0x86, "S_TEXT/UTF8"))
    tracks = element(0x1654AE6B, video + audio + subs)
    cluster = b"\x1f\x43\xb6\x75" + UNKNOWN_SIZE + uint_el(0xE7, 0) + element(0xA3, bytes(16))
    segment = b"\x18\x53\x80\x67" + UNKNOWN_SIZE + info + element(0xBF, bytes(4)) + tracks + cluster
    return ebml_header("matroska") + segment


FIXTURES = {
    "video_avc.mp4": video_avc_mp4,
    "audio_aac.m4a": audio_aac_m4a,
    "av_hevc.mp4": av_hevc_mp4,
    "vp8.webm": vp8_webm,
    "av.mkv": av_mkv,
}


if __name__ == "__main__":
    for name, build in FIXTURES.items():
        data = build()
        (HERE / name).write_bytes(data)
        print(f"{name}: {len(data)} bytes")
