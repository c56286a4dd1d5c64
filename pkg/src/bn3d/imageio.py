"""Plain binary image formats: PPM (color), PGM (labels), PFM (depth).

Everything round-trips bit-exactly at its stored precision: 8-bit for
PPM/PGM, IEEE float32 for PFM. PFM rows are stored bottom-up per the format
convention; +inf depth values pass through untouched.
"""

from __future__ import annotations

import numpy as np


def write_ppm(path, rgb8: np.ndarray) -> None:
    if rgb8.dtype != np.uint8 or rgb8.ndim != 3 or rgb8.shape[2] != 3:
        raise ValueError("write_ppm expects (H, W, 3) uint8")
    h, w, _ = rgb8.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb8.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, (w, h), maxval, data = _read_netpbm(f)
    if magic != b"P6" or maxval != 255:
        raise ValueError(f"unsupported PPM variant {magic} maxval={maxval}")
    return np.frombuffer(data, dtype=np.uint8, count=h * w * 3).reshape(h, w, 3).copy()


def write_pgm(path, gray8: np.ndarray) -> None:
    if gray8.dtype != np.uint8 or gray8.ndim != 2:
        raise ValueError("write_pgm expects (H, W) uint8")
    h, w = gray8.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(gray8.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, (w, h), maxval, data = _read_netpbm(f)
    if magic != b"P5" or maxval != 255:
        raise ValueError(f"unsupported PGM variant {magic} maxval={maxval}")
    return np.frombuffer(data, dtype=np.uint8, count=h * w).reshape(h, w).copy()


def _read_netpbm(f):
    magic = f.read(2)
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise ValueError("truncated netpbm header")
        body = line.split(b"#", 1)[0]
        fields.extend(int(tok) for tok in body.split())
    w, h, maxval = fields[:3]
    return magic, (w, h), maxval, f.read()


def write_pfm(path, img: np.ndarray) -> None:
    if img.ndim != 2:
        raise ValueError("write_pfm expects a single-channel (H, W) array")
    data = np.ascontiguousarray(img[::-1].astype(np.float32))
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale: little-endian
        f.write(data.tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"Pf":
            raise ValueError(f"unsupported PFM variant {magic!r}")
        w, h = (int(tok) for tok in f.readline().split())
        scale = float(f.readline())
        data = f.read(w * h * 4)
    dtype = "<f4" if scale < 0 else ">f4"
    img = np.frombuffer(data, dtype=dtype, count=h * w).reshape(h, w)
    return img[::-1].astype(np.float32)


def quantize_rgb(rgb: np.ndarray) -> np.ndarray:
    """Float [0,1] color to uint8, round-half-away like the renderer expects."""
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def dequantize_rgb(rgb8: np.ndarray) -> np.ndarray:
    return rgb8.astype(np.float64) / 255.0
