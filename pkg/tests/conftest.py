from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).parent / "fixtures"
CONTAINERS = sorted(p for p in FIXTURES.iterdir() if p.suffix in (".mp4", ".m4a", ".mkv", ".webm"))


def mutate(data: bytes, rng) -> bytes:
    """One random corruption: byte flips, truncation, insertion or a poisoned 32-bit word."""
    b = bytearray(data)
    op = rng.integers(4)
    if op == 0:
        for _ in range(rng.integers(1, 5)):
            b[rng.integers(len(b))] = rng.integers(256)
    elif op == 1:
        b = b[:rng.integers(len(b))]
    elif op == 2:
        p = rng.integers(len(b))
        b[p:p] = rng.integers(0, 256, rng.integers(1, 9), dtype=np.uint8).tobytes()
    else:
        p = rng.integers(len(b) - 4)
        b[p:p + 4] = [b"\xff\xff\xff\xff", b"\x00\x00\x00\x00", b"\x00\x00\x00\x01", b"\x01\xff\xff\xff"][rng.integers(4)]
    return bytes(b)


def write_manifest(path: Path, rows):
    lines = ["path,label"] + [f"{p},{'' if lab is None else lab}" for p, lab in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
