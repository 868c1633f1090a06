"""Image loading, saving and per-image histogram equalization.

Images are 8-bit grayscale, held as uint8 numpy arrays of shape
(height, width). The only interchange format is binary PGM (P5, maxval
255). Before entering the network, images are rescaled to float64 in
[0, 1] with :func:`to_unit_float`.
"""

import numpy as np


class PgmError(ValueError):
    """Malformed or unsupported PGM data; message names the byte offset."""


def equalize_histogram(img):
    """Classic CDF remap onto the full 0..255 range.

    out(v) = round((cdf(v) - cdf_min) / (N - cdf_min) * 255), with N the
    pixel count and cdf_min the smallest nonzero CDF value. Computed in
    exact integer arithmetic with round-half-up, so the mapping is fully
    reproducible. A constant image (N == cdf_min) is returned unchanged.
    """
    img = _check_image(img)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.int64)
    cdf = np.cumsum(hist)
    n = int(cdf[-1])
    cdf_min = int(hist[int(img.min())]) if n else 0
    denom = n - cdf_min
    if denom == 0:
        return img.copy()
    # round-half-up of (cdf - cdf_min) * 255 / denom, in integers
    lut = ((cdf - cdf_min) * 510 + denom) // (2 * denom)
    return lut[img].astype(np.uint8)


def to_unit_float(img):
    """uint8 image -> float64 in [0, 1] (divide by 255)."""
    img = _check_image(img)
    return img.astype(np.float64) / 255.0


def _check_image(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if img.dtype != np.uint8:
        if not (np.issubdtype(img.dtype, np.integer) and img.min() >= 0 and img.max() <= 255):
            raise ValueError("image values must be integers in [0, 255]")
        img = img.astype(np.uint8)
    return img


def load_image(path):
    """Read a binary PGM (P5, maxval 255) file into a uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_pgm(data)


def save_image(img, path):
    """Write a uint8 image as binary PGM (P5, maxval 255)."""
    img = _check_image(img)
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())


def parse_pgm(data):
    """Parse binary PGM bytes; raises PgmError naming the failing byte offset."""
    if data[:2] == b"P2":
        raise PgmError(
            "unsupported format: ASCII PGM magic 'P2' at byte 0 (only binary 'P5' is supported)"
        )
    if data[:2] != b"P5":
        raise PgmError(f"bad magic at byte 0: expected b'P5', found {data[:2]!r}")

    pos = 2
    fields = []
    while len(fields) < 3:
        pos = _skip_pgm_whitespace(data, pos)
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise PgmError(
                f"malformed header: expected an integer at byte {start}, "
                f"found {data[start:start + 1]!r}"
            )
        fields.append(int(data[start:pos]))

    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmError(f"malformed header: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval} in header (must be 255)")
    if pos >= len(data):
        raise PgmError(f"truncated file: missing whitespace after maxval at byte {pos}")
    if data[pos] not in b" \t\r\n":
        raise PgmError(
            f"malformed header: expected single whitespace after maxval at byte {pos}"
        )
    pos += 1

    expected = width * height
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise PgmError(
            f"truncated pixel payload at byte {pos}: expected {expected} bytes, "
            f"got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def _skip_pgm_whitespace(data, pos):
    # PGM headers allow whitespace and '#' comments running to end of line
    while pos < len(data):
        ch = data[pos]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
        else:
            break
    return pos


def save_mask(mask, path):
    """Write a binary mask as PGM with foreground 255, background 0."""
    mask = np.asarray(mask)
    save_image((mask > 0).astype(np.uint8) * 255, path)


def load_mask(path):
    """Read a mask PGM back into a boolean array (foreground = value > 127)."""
    return load_image(path) > 127
