"""Data ingestion: MNIST IDX files, PGM images, synthetic sparse signals.

All loaders return samples as float64 columns scaled to [0, 1] and fail
loudly on malformed input rather than returning partial data.  The
synthetic generator provides exactly-k-sparse signal columns so the
compressed-sensing pipeline can be exercised without any downloads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Sample columns plus optional integer labels and an origin tag."""

    samples: np.ndarray
    labels: np.ndarray | None
    source: str

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ValueError(
                f"samples must be n x N with N >= 1, got "
                f"{self.samples.shape}")
        if self.labels is not None \
                and len(self.labels) != self.samples.shape[1]:
            raise ValueError(
                f"{len(self.labels)} labels for {self.samples.shape[1]} "
                "samples")

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def count(self):
        return self.samples.shape[1]


def _read_exact(path, expect_magic, header_words):
    with open(path, "rb") as fh:
        blob = fh.read()
    head = 4 * (1 + header_words)
    if len(blob) < head:
        raise ValueError(f"{path}: truncated IDX header")
    fields = struct.unpack_from(f">{1 + header_words}I", blob, 0)
    if fields[0] != expect_magic:
        raise ValueError(
            f"{path}: bad IDX magic 0x{fields[0]:08x}, "
            f"expected 0x{expect_magic:08x}")
    return fields[1:], blob[head:]


def load_mnist_idx(images_path, labels_path=None):
    """Load an MNIST-style IDX image file (and optional label file).

    Images are big-endian u8 with magic 0x00000803 and dims
    count x rows x cols; each image is flattened row-major and scaled by
    1/255 into a column.  Labels use magic 0x00000801 and must agree on
    the count.
    """
    (count, rows, cols), payload = _read_exact(images_path,
                                               IDX_IMAGES_MAGIC, 3)
    need = count * rows * cols
    if len(payload) != need:
        raise ValueError(
            f"{images_path}: payload is {len(payload)} bytes, "
            f"expected {need} for {count} images of {rows}x{cols}")
    pixels = np.frombuffer(payload, dtype=np.uint8)
    samples = (pixels.reshape(count, rows * cols).T).astype(np.float64)
    samples /= 255.0
    labels = None
    if labels_path is not None:
        (lcount,), lpayload = _read_exact(labels_path, IDX_LABELS_MAGIC, 1)
        if len(lpayload) != lcount:
            raise ValueError(
                f"{labels_path}: payload is {len(lpayload)} bytes, "
                f"expected {lcount}")
        if lcount != count:
            raise ValueError(
                f"{labels_path}: {lcount} labels for {count} images")
        labels = np.frombuffer(lpayload, dtype=np.uint8).astype(np.int64)
    return Dataset(samples, labels, source=str(images_path))


def load_grayscale_image(path):
    """Load a binary 8-bit PGM (P5) image as a 2-D array in [0, 1].

    The header is the P5 magic, then width, height, and maxval tokens
    separated by whitespace ('#' comment lines allowed), followed by one
    unsigned byte per pixel, row-major.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {blob[:2]!r})")
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(blob):
            raise ValueError(f"{path}: truncated PGM header")
        c = blob[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = blob.find(b"\n", pos)
            if nl < 0:
                raise ValueError(f"{path}: unterminated PGM comment")
            pos = nl + 1
        else:
            end = pos
            while end < len(blob) and not blob[end:end + 1].isspace():
                end += 1
            tokens.append(blob[pos:end])
            pos = end
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise ValueError(f"{path}: invalid PGM size {width}x{height}")
    if maxval != 255:
        raise ValueError(
            f"{path}: only 8-bit PGM supported, maxval is {maxval}")
    pos += 1  # single whitespace byte after the header
    payload = blob[pos:]
    if len(payload) != width * height:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, "
            f"expected {width * height}")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return img.astype(np.float64) / 255.0


def save_grayscale_image(image, path):
    """Write a [0, 1] 2-D array as binary 8-bit PGM (P5)."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got {image.ndim}-D")
    data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def gen_sparse(n, k, N, seed):
    """Exactly-k-sparse signal columns with magnitudes uniform in [0.2, 1].

    Support positions are drawn uniformly without replacement per
    column; values are positive so the [0, 1] sample-range invariant
    holds.
    """
    if not 0 < k <= n:
        raise ValueError(f"need 0 < k <= n, got k={k} n={n}")
    if N < 1:
        raise ValueError(f"need at least one column, got N={N}")
    rng = np.random.default_rng(seed)
    samples = np.zeros((n, N))
    for j in range(N):
        support = rng.choice(n, size=k, replace=False)
        samples[support, j] = rng.uniform(0.2, 1.0, size=k)
    return Dataset(samples, None, source=f"sparse(n={n},k={k},seed={seed})")
