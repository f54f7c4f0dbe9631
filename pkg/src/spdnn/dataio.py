"""File formats: MNIST IDX containers, challenge TSV triples, category lists.

Files are 1-based (graph-community convention); in-memory structures are
0-based. The conversion happens here and nowhere else. Writers are
deterministic (same object, same bytes); readers reject malformed input
rather than repairing it.
"""

from __future__ import annotations

import dataclasses
import struct
import warnings

import numpy as np

from .sparse_core import SparseMatrix

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

STANDARD_SIDES = (32, 64, 128, 256)
DEFAULT_THRESHOLD = 128


class FormatError(ValueError):
    """Malformed input file."""


@dataclasses.dataclass(frozen=True)
class ImageSet:
    """Grayscale square images, one uint8 array of shape (n, side, side)."""

    pixels: np.ndarray

    @property
    def n_images(self):
        return self.pixels.shape[0]

    @property
    def side(self):
        return self.pixels.shape[1]


def read_idx_images(path):
    raw = open(path, "rb").read()
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated IDX header ({len(raw)} bytes, need 16)")
    magic, count, n_rows, n_cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"{path}: bad magic 0x{magic:08x} at byte 0 (expected 0x{IDX_IMAGE_MAGIC:08x})")
    if n_rows != n_cols:
        raise FormatError(f"{path}: non-square images {n_rows}x{n_cols}")
    expected = count * n_rows * n_cols
    payload = raw[16:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes from byte 16, expected {expected} "
            f"for {count} images of {n_rows}x{n_cols}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, n_rows, n_cols)
    return ImageSet(pixels)


def read_idx_labels(path):
    raw = open(path, "rb").read()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated IDX header ({len(raw)} bytes, need 8)")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(
            f"{path}: bad magic 0x{magic:08x} at byte 0 (expected 0x{IDX_LABEL_MAGIC:08x})")
    payload = raw[8:]
    if len(payload) != count:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes from byte 8, expected {count}")
    return np.frombuffer(payload, dtype=np.uint8).copy()


def write_idx_images(images, path):
    """Inverse of read_idx_images; used to build fixtures."""
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, images.n_images,
                            images.side, images.side))
        f.write(images.pixels.tobytes())


def bilinear_resize(img, target_side):
    """Resize a square grayscale image with pixel-center-aligned bilinear sampling."""
    img = np.asarray(img, dtype=np.float64)
    src = img.shape[0]
    scale = src / target_side
    coord = np.clip((np.arange(target_side) + 0.5) * scale - 0.5, 0.0, src - 1.0)
    lo = np.floor(coord).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = coord - lo
    rows = img[lo][:, lo] * (1 - frac)[:, None] + img[hi][:, lo] * frac[:, None]
    out = rows * (1 - frac)[None, :]
    rows_hi = img[lo][:, hi] * (1 - frac)[:, None] + img[hi][:, hi] * frac[:, None]
    return out + rows_hi * frac[None, :]


def preprocess_image(img, target_side, threshold=DEFAULT_THRESHOLD):
    """Resize, binarize at threshold, flatten row-major; return 1-based on-pixel indices."""
    if target_side not in STANDARD_SIDES:
        warnings.warn(f"nonstandard target side {target_side} "
                      f"(challenge sides are {STANDARD_SIDES})", stacklevel=2)
    if not 1 <= threshold <= 255:
        raise ValueError(f"threshold must be in [1, 255], got {threshold}")
    resized = bilinear_resize(img, target_side)
    on = (resized >= threshold).ravel()
    return np.nonzero(on)[0] + 1


def _write_lines(lines, path):
    with open(path, "w", newline="\n") as f:
        f.writelines(lines)


def _parse_triples(path, n_rows, n_cols, value_check):
    """Shared triple-file parser; enforces sort order and index ranges."""
    rows, cols, vals = [], [], []
    prev = (0, 0)
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                r, c = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field") from None
            if r < 1 or (n_rows is not None and r > n_rows):
                raise FormatError(f"{path}:{lineno}: row index {r} out of range")
            if not 1 <= c <= n_cols:
                raise FormatError(f"{path}:{lineno}: column index {c} out of range")
            if (r, c) <= prev:
                raise FormatError(f"{path}:{lineno}: triples not strictly sorted by (row, col)")
            value_check(lineno, v)
            prev = (r, c)
            rows.append(r - 1)
            cols.append(c - 1)
            vals.append(v)
    return rows, cols, vals


def write_input_tsv(images, path):
    """images: per-image arrays of 1-based on-pixel indices; value is always 1."""
    lines = []
    for i, pix in enumerate(images, start=1):
        lines.extend(f"{i}\t{p}\t1\n" for p in sorted(int(p) for p in pix))
    _write_lines(lines, path)


def read_input_tsv(path, n_neurons, n_rows=None):
    def check(lineno, v):
        if v != 1:
            raise FormatError(f"{path}:{lineno}: input value must be 1, got {v}")

    rows, cols, vals = _parse_triples(path, n_rows, n_neurons, check)
    if n_rows is None:
        n_rows = max(rows) + 1 if rows else 0
    m = SparseMatrix.from_coo(n_rows, n_neurons, rows, cols, vals)
    m.validate()
    return m


def write_layer_tsv(w, path):
    lines = []
    rows = np.repeat(np.arange(w.n_rows), w.row_nnz())
    for r, c, v in zip(rows, w.col_indices, w.values):
        lines.append(f"{r + 1}\t{c + 1}\t{float(v)!r}\n")
    _write_lines(lines, path)


def read_layer_tsv(path, n_neurons):
    def check(lineno, v):
        if v == 0:
            raise FormatError(f"{path}:{lineno}: explicit zero weight")

    rows, cols, vals = _parse_triples(path, n_neurons, n_neurons, check)
    m = SparseMatrix.from_coo(n_neurons, n_neurons, rows, cols, vals)
    m.validate()
    return m


def write_categories(cats, path):
    _write_lines([f"{c}\n" for c in cats], path)


def read_categories(path):
    cats = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            try:
                c = int(line.strip())
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer category") from None
            if cats and c <= cats[-1]:
                raise FormatError(f"{path}:{lineno}: categories not strictly increasing")
            if c < 1:
                raise FormatError(f"{path}:{lineno}: category index {c} < 1")
            cats.append(c)
    return cats
