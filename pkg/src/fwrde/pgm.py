"""Minimal binary PGM (P5, 8-bit) reader/writer for greyscale heatmaps."""

import numpy as np

from .exceptions import InputError


def write_pgm(path, scores, width, height):
    """Write scores in [0, 1] as an 8-bit P5 image, value = round(255 * s)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size != width * height:
        raise InputError(f"cannot arrange {scores.size} values as {width}x{height}")
    pixels = np.rint(255.0 * np.clip(scores, 0.0, 1.0)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path):
    """Read a binary P5 image; returns (values in [0,1] flattened, width, height)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read PGM file {path}: {exc}")
    if not data.startswith(b"P5"):
        raise InputError(f"{path} is not a binary (P5) PGM file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError(f"truncated PGM header in {path}")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise InputError(f"malformed PGM header in {path}")
    if maxval != 255:
        raise InputError(f"only 8-bit PGM supported, got maxval {maxval}")
    raw = data[pos : pos + width * height]
    if len(raw) != width * height:
        raise InputError(f"PGM payload of {path} is truncated")
    values = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return values, width, height
