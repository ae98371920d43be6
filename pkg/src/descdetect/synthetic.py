"""Synthetic descriptor corpus for desk-scale experiments.

Pristine videos look like straight-from-camera files: no muxer tag,
camera resolutions and frame rates, high bits-per-pixel. Manipulated videos
look like they went through an editing/re-encoding tool: library muxer tags,
re-encoder profiles and levels, and perturbed, lower bit rates. A slice of
each cohort borrows the other cohort's traits so the problem is not
trivially separable.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .extract.record import DescriptorRecord, StreamDescriptor

TRAIN_POSITIVE_FRACTION = 0.247
TEST_POSITIVE_FRACTION = 0.306

CAMERA_SIZES = [(1920, 1080), (1280, 720), (3840, 2160), (1080, 1920)]
EDIT_SIZES = [(1280, 720), (854, 480), (640, 360), (1920, 1080), (720, 1280)]
CAMERA_RATES = [Fraction(30000, 1001), Fraction(30), Fraction(60000, 1001), Fraction(25), Fraction(24000, 1001)]
EDIT_RATES = [Fraction(25), Fraction(30), Fraction(24), Fraction(30000, 1001)]
MUXERS = ["Lavf57.83.100", "Lavf58.29.100", "Lavf56.40.101", "Lavf58.76.100"]
CAMERA_BRANDS = ["qt  ", "mp42", "isom"]


def _pick(rng, options, weights=None):
    if weights is not None:
        weights = np.asarray(weights, dtype=float) / np.sum(weights)
    return options[int(rng.choice(len(options), p=weights))]


def _video(rng, manipulated, disguised):
    camera_like = not manipulated or disguised
    width, height = _pick(rng, CAMERA_SIZES if camera_like else EDIT_SIZES)
    rate = _pick(rng, CAMERA_RATES if camera_like else EDIT_RATES)
    duration = float(np.round(rng.uniform(4.0, 90.0), 3))
    if camera_like:
        codec = _pick(rng, ["h264", "hevc"], [0.75, 0.25])
        profile = "Main" if codec == "hevc" else _pick(rng, ["High", "Main", "Baseline"], [0.7, 0.25, 0.05])
        level = int(_pick(rng, [40, 41, 42, 51]) if codec == "h264" else _pick(rng, [120, 123, 150, 153]))
        bpp = rng.lognormal(np.log(0.28), 0.18)
        pix_fmt = _pick(rng, ["yuvj420p", "yuv420p"], [0.4, 0.6])
    else:
        codec = _pick(rng, ["h264", "hevc", "mpeg4"], [0.85, 0.1, 0.05])
        profile = _pick(rng, ["High", "Main", "Constrained Baseline"], [0.6, 0.3, 0.1])
        level = int(_pick(rng, [30, 31, 32, 40]))
        bpp = rng.lognormal(np.log(0.07), 0.35)
        pix_fmt = "yuv420p"
    if manipulated:
        bpp *= rng.uniform(0.35, 0.8)
    fps = float(rate)
    bit_rate = int(width * height * fps * bpp)
    fields = {
        "codec_name": codec, "codec_type": "video", "profile": profile, "level": level,
        "width": width, "height": height, "pix_fmt": pix_fmt,
        "avg_frame_rate": f"{rate.numerator}/{rate.denominator}",
        "bit_rate": str(bit_rate), "nb_frames": str(int(duration * fps)),
        "duration": f"{duration:.6f}",
    }
    if rng.random() < 0.03:
        fields["bit_rate"] = "N/A"
    return fields, duration, bit_rate


def _audio(rng, manipulated, disguised, duration):
    camera_like = not manipulated or disguised
    if camera_like:
        rate = _pick(rng, [48000, 44100], [0.85, 0.15])
        channels = _pick(rng, [2, 1], [0.85, 0.15])
        bit_rate = int(rng.choice([96000, 128000, 192000, 256000]))
    else:
        rate = _pick(rng, [44100, 48000], [0.65, 0.35])
        channels = 2
        bit_rate = int(rng.choice([64000, 128000, 160000]))
    return {
        "codec_name": "aac", "codec_type": "audio", "profile": "LC",
        "sample_rate": str(rate), "channels": channels, "bit_rate": str(bit_rate),
        "nb_frames": str(int(duration * rate / 1024)), "duration": f"{duration:.6f}",
    }, bit_rate


def synthetic_record(rng, manipulated: bool, source_id: str) -> DescriptorRecord:
    disguised = manipulated and rng.random() < 0.12
    video, duration, video_rate = _video(rng, manipulated, disguised)
    streams = [StreamDescriptor("video", 0, video)]
    audio_rate = 0
    has_audio = rng.random() < (0.95 if not manipulated or disguised else 0.75)
    if has_audio:
        audio, audio_rate = _audio(rng, manipulated, disguised, duration)
        streams.append(StreamDescriptor("audio", 1, audio))
    if not manipulated and rng.random() < 0.3:
        streams.append(StreamDescriptor("data", len(streams), {"codec_type": "data", "codec_name": "none"}))
    overhead = rng.uniform(1.001, 1.02)
    total_rate = int((video_rate + audio_rate) * overhead)
    fmt = {
        "format_name": "mov,mp4,m4a,3gp,3g2,mj2",
        "duration": f"{duration:.6f}",
        "size": str(int(total_rate * duration / 8)),
        "bit_rate": str(total_rate),
        "nb_streams": len(streams),
        "tags.major_brand": _pick(rng, CAMERA_BRANDS) if not manipulated or disguised else "isom",
    }
    if manipulated and not disguised:
        if rng.random() < 0.9:
            fmt["tags.encoder"] = _pick(rng, MUXERS)
    elif rng.random() < 0.04:
        fmt["tags.encoder"] = _pick(rng, MUXERS)
    return DescriptorRecord(source_id, fmt, streams)


def generate_corpus(n: int, positive_fraction: float = TRAIN_POSITIVE_FRACTION, seed: int = 0,
                    prefix: str = "video"):
    """Return ``(records, labels)`` with ``round(n * positive_fraction)`` positives in shuffled order."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    n_pos = int(round(n * positive_fraction))
    labels = np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)]
    labels = labels[rng.permutation(n)]
    width = len(str(n))
    records = [synthetic_record(rng, bool(lab), f"{prefix}_{i:0{width}d}") for i, lab in enumerate(labels)]
    return records, labels


def write_corpus(directory, n: int, positive_fraction: float = TRAIN_POSITIVE_FRACTION, seed: int = 0,
                 prefix: str = "video", manifest_name: str = "manifest.csv") -> Path:
    """Write one probe report per record plus a labeled manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records, labels = generate_corpus(n, positive_fraction, seed, prefix)
    lines = ["path,label"]
    for record, label in zip(records, labels):
        name = f"{record.source_id}.json"
        (directory / name).write_text(json.dumps(record.to_report(), indent=1) + "\n", encoding="utf-8")
        lines.append(f"{name},{int(label)}")
    manifest = directory / manifest_name
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
