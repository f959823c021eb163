"""Binary PGM (P5) and PPM (P6) reading and writing.

Sample values above 255 use two bytes per sample, most significant byte
first, per the netpbm convention. Writers produce a fixed header layout so
identical arrays yield byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pgm(path, image: np.ndarray, maxval: int) -> None:
    """Write a single-channel image; dtype is chosen by maxval."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {img.shape}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    if img.min() < 0 or img.max() > maxval:
        raise ValueError(f"pixel values outside [0, {maxval}]")
    h, w = img.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        payload = img.astype(">u2").tobytes()
    else:
        payload = img.astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def write_ppm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write an RGB image of shape (H, W, 3)."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) array, got shape {img.shape}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        payload = img.astype(">u2").tobytes()
    else:
        payload = img.astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def _read_netpbm(path, magic: bytes, channels: int) -> tuple[np.ndarray, int]:
    blob = Path(path).read_bytes()
    if not blob.startswith(magic):
        raise ValueError(f"{path}: expected {magic.decode()} file")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; one whitespace byte separates maxval from data
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(blob):
            raise ValueError(f"{path}: truncated header")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            pos = blob.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(blob) and not blob[end : end + 1].isspace():
                end += 1
            tokens.append(int(blob[pos:end]))
            pos = end
    pos += 1  # the single whitespace byte before the raster
    w, h, maxval = tokens
    n = w * h * channels
    if maxval > 255:
        data = np.frombuffer(blob, dtype=">u2", count=n, offset=pos).astype(np.uint16)
    else:
        data = np.frombuffer(blob, dtype=np.uint8, count=n, offset=pos).astype(np.uint16)
    if data.size != n:
        raise ValueError(f"{path}: truncated pixel data")
    shape = (h, w) if channels == 1 else (h, w, channels)
    return data.reshape(shape), maxval


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary PGM; returns (uint16 array of shape (H, W), maxval)."""
    return _read_netpbm(path, b"P5", 1)


def read_ppm(path) -> tuple[np.ndarray, int]:
    """Read a binary PPM; returns (uint16 array of shape (H, W, 3), maxval)."""
    return _read_netpbm(path, b"P6", 3)
