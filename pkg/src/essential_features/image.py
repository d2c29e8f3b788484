"""Image representation, PPM/PGM I/O, padding, resizing and augmentation.

An image is a float64 ``numpy`` array of shape ``(H, W, C)`` with ``C`` in
``{1, 3}`` and every intensity in ``[0, 1]``. All functions here are pure and
return fresh arrays.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "PPMFormatError",
    "make_rng",
    "derive_seed",
    "as_image",
    "check_image",
    "load_ppm",
    "save_ppm",
    "encode_ppm",
    "reflect101_index",
    "pad_reflect101",
    "area_resize",
    "horizontal_flip",
    "pad_and_random_crop",
]

_WHITESPACE = b" \t\r\n\x0b\x0c"


class PPMFormatError(ValueError):
    """Malformed or unsupported PPM/PGM payload."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def make_rng(seed):
    """Deterministic generator (numpy PCG64) for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(seed, *keys):
    """Mix ``seed`` with integer ``keys`` into a new 64-bit seed.

    Used for per-example, per-epoch and per-step streams so that results do not
    depend on the order in which work is scheduled.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def as_image(data):
    """Coerce a 2-D or 3-D array into the canonical ``(H, W, C)`` float64 form."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return check_image(arr)


def check_image(image):
    if not isinstance(image, np.ndarray) or image.ndim != 3:
        raise ValueError("image must be an (H, W, C) array")
    h, w, c = image.shape
    if h < 1 or w < 1:
        raise ValueError(f"image must be non-empty, got {h}x{w}")
    if c not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {c}")
    if not (np.all(image >= 0.0) and np.all(image <= 1.0)):
        raise ValueError("image intensities must lie in [0, 1]")
    return image


# ---------------------------------------------------------------------------
# PPM / PGM


def _skip_space_and_comments(buf, pos):
    while pos < len(buf):
        ch = buf[pos : pos + 1]
        if ch in (b"#",):
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch and ch in _WHITESPACE:
            pos += 1
        else:
            break
    return pos


def _read_int(buf, pos, what):
    pos = _skip_space_and_comments(buf, pos)
    start = pos
    while pos < len(buf) and buf[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise PPMFormatError(f"expected {what}", start)
    return int(buf[start:pos]), pos


def decode_ppm(buf):
    """Decode binary P6/P5 bytes with maxval 255 into an image."""
    magic = buf[:2]
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise PPMFormatError(f"unsupported magic {magic!r}; only binary P6/P5", 0)
    pos = 2
    if pos >= len(buf) or buf[pos : pos + 1] not in _WHITESPACE:
        raise PPMFormatError("expected whitespace after magic", pos)
    width, pos = _read_int(buf, pos, "width")
    height, pos = _read_int(buf, pos, "height")
    maxval_at = _skip_space_and_comments(buf, pos)
    maxval, pos = _read_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise PPMFormatError(f"invalid size {width}x{height}", maxval_at)
    if maxval != 255:
        raise PPMFormatError(f"unsupported maxval {maxval}", maxval_at)
    if pos >= len(buf) or buf[pos : pos + 1] not in _WHITESPACE:
        raise PPMFormatError("expected single whitespace before payload", pos)
    pos += 1
    n = width * height * channels
    payload = buf[pos : pos + n]
    if len(payload) < n:
        raise PPMFormatError(
            f"truncated payload: expected {n} bytes, found {len(payload)}", pos + len(payload)
        )
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return data.astype(np.float64) / 255.0


def load_ppm(path):
    with open(path, "rb") as f:
        buf = f.read()
    try:
        return decode_ppm(buf)
    except PPMFormatError as err:
        raise PPMFormatError(f"{path}: {err.args[0]}", err.offset) from None


def _to_bytes(image):
    # round half away from zero; intensities are non-negative
    return np.floor(image * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def encode_ppm(image):
    image = check_image(image)
    h, w, c = image.shape
    magic = b"P6" if c == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (w, h)
    return header + _to_bytes(image).tobytes()


def save_ppm(image, path):
    """Write ``image`` as binary P6 (RGB) or P5 (grayscale)."""
    data = encode_ppm(image)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as err:
        raise OSError(err.errno, f"cannot write {os.fspath(path)}: {err.strerror}") from err


# ---------------------------------------------------------------------------
# geometry


def reflect101_index(n, lo, hi):
    """Source indices for padded positions ``lo..hi-1`` of an axis of length ``n``.

    Reflect-101 (``cba|abcd|dcb`` without repeating the edge sample); margins
    larger than the axis are handled by repeated reflection.
    """
    idx = np.arange(lo, hi)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def pad_reflect101(image, margin):
    if margin < 0:
        raise ValueError("margin must be non-negative")
    h, w = image.shape[:2]
    if margin > min(h, w) - 1:
        raise ValueError(f"margin {margin} too large for {h}x{w} image")
    if margin == 0:
        return image.copy()
    return np.pad(image, ((margin, margin), (margin, margin), (0, 0)), mode="reflect")


def _area_weights(n_in, n_out):
    """Row-stochastic (n_out, n_in) matrix of source-footprint overlaps."""
    scale = n_in / n_out
    weights = np.zeros((n_out, n_in))
    for i in range(n_out):
        start, stop = i * scale, (i + 1) * scale
        j0, j1 = int(np.floor(start)), int(np.ceil(stop))
        for j in range(j0, min(j1, n_in)):
            overlap = min(stop, j + 1) - max(start, j)
            if overlap > 0:
                weights[i, j] = overlap
        weights[i] /= weights[i].sum()
    return weights


def area_resize(image, out_h, out_w):
    """Downscale by area averaging (each output pixel averages its footprint)."""
    h, w = image.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    if out_h > h or out_w > w:
        raise ValueError(f"area_resize only downscales ({h}x{w} -> {out_h}x{out_w})")
    if (out_h, out_w) == (h, w):
        return image.copy()
    out = np.einsum("ih,hwc->iwc", _area_weights(h, out_h), image)
    out = np.einsum("jw,iwc->ijc", _area_weights(w, out_w), out)
    return np.clip(out, 0.0, 1.0)


def horizontal_flip(image):
    return image[:, ::-1, :].copy()


def pad_and_random_crop(image, pad, rng, fill="zero"):
    """Pad by ``pad`` on every side and crop a random window of the input size.

    ``fill`` is ``"zero"`` (default) or ``"reflect"`` (reflect-101).
    """
    if pad < 0:
        raise ValueError("pad must be non-negative")
    if pad == 0:
        return image.copy()
    h, w = image.shape[:2]
    if fill == "zero":
        padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)), mode="constant")
    elif fill == "reflect":
        rows = reflect101_index(h, -pad, h + pad)
        cols = reflect101_index(w, -pad, w + pad)
        padded = image[rows][:, cols]
    else:
        raise ValueError(f"unknown fill {fill!r}")
    dy, dx = rng.integers(0, 2 * pad + 1, size=2)
    return padded[dy : dy + h, dx : dx + w].copy()
