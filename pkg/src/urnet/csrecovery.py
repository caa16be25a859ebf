"""Compressed-sensing recovery: sensing matrices, training pairs, metrics.

The pipeline trains a network to invert a random Gaussian measurement
operator.  Signals ``x`` (length n) are observed as ``y = A x`` with
``m < n`` rows; the network learns the map from the right-inverse
preimage ``A+ y`` back to ``x``, so recovery is a single forward pass.
This module owns the sensing-problem container, the training-pair
construction, forward-inference recovery, and the image quality metrics
(MSE / PSNR / SSIM) plus the overlapping-patch slicing used for images.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.signal import convolve2d

from .model import forward

SENSING_MAGIC = b"URSM"
SENSING_VERSION = 1


@dataclass
class SensingProblem:
    """A measurement matrix with its right pseudo-inverse.

    ``A`` is m x n with m <= n and ``A_pinv = A.T (A A.T)^-1`` satisfies
    ``A @ A_pinv = I`` up to float tolerance.  Square problems (m = n,
    where the pseudo-inverse is the plain inverse) are permitted for
    identity smoke tests; :func:`gen_sensing` itself only produces
    genuinely compressive m < n problems.
    """

    A: np.ndarray
    A_pinv: np.ndarray
    m: int
    n: int
    seed: int

    def __post_init__(self):
        if self.A.shape != (self.m, self.n):
            raise ValueError(
                f"A has shape {self.A.shape}, expected {(self.m, self.n)}")
        if self.A_pinv.shape != (self.n, self.m):
            raise ValueError(
                f"A_pinv has shape {self.A_pinv.shape}, "
                f"expected {(self.n, self.m)}")
        if not 0 < self.m <= self.n:
            raise ValueError(f"need 0 < m <= n, got m={self.m} n={self.n}")

    @property
    def ratio(self):
        """The CS ratio m / n."""
        return self.m / self.n


def right_inverse_error(A, A_pinv):
    """Frobenius norm of A @ A_pinv - I."""
    m = A.shape[0]
    return float(np.linalg.norm(A @ A_pinv - np.eye(m)))


def gen_sensing(m, n, seed):
    """Sample an m x n Gaussian sensing problem with entries N(0, 1/m).

    The right pseudo-inverse is computed through a Cholesky
    factorization of the small m x m Gram matrix ``A A.T`` and the
    right-inverse identity is verified to 1e-8 before returning.

    Raises
    ------
    ValueError
        If not 0 < m < n.
    RuntimeError
        If ``A A.T`` is numerically singular or the verification fails
        (practically impossible for Gaussian rows).
    """
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m} n={n}")
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    try:
        cf = cho_factor(A @ A.T, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"A A^T is numerically singular: {exc}") from exc
    A_pinv = cho_solve(cf, A, check_finite=False).T
    err = right_inverse_error(A, A_pinv)
    if err > 1e-8:
        raise RuntimeError(
            f"right-inverse verification failed: ||A A+ - I|| = {err:.3e}")
    return SensingProblem(A, A_pinv, m, n, int(seed))


def build_training(X, sensing):
    """Measurement-consistent training pairs (A+ A X, X).

    Columns of ``X`` are signals; the returned inputs are the
    right-inverse preimages of their measurements and the targets are
    the originals.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != sensing.n:
        raise ValueError(
            f"X must be {sensing.n} x N (signals as columns), "
            f"got shape {X.shape}")
    Y = sensing.A @ X
    return sensing.A_pinv @ Y, X


def recover(net, sensing, y):
    """Forward-inference reconstruction of measurements ``y``.

    Accepts one measurement vector (length m) or a matrix of
    measurement columns; returns the reconstruction(s) with matching
    arrangement.
    """
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if y.shape[0] != sensing.m:
        raise ValueError(
            f"measurements have {y.shape[0]} rows, expected {sensing.m}")
    xhat = forward(net, sensing.A_pinv @ y)
    return xhat[:, 0] if squeeze else xhat


# ------------------------------------------------------------------ metrics


def mse(x, xhat):
    """Mean squared difference over all entries."""
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    d = x - xhat
    return float(np.mean(d * d))


def psnr(x, xhat, peak=1.0):
    """Peak signal-to-noise ratio in dB (+inf for a perfect match)."""
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    e = mse(x, xhat)
    if e == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / e))


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords * coords) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, xhat, peak=1.0, k1=0.01, k2=0.03, window_size=11, sigma=1.5):
    """Mean structural similarity over all valid window positions.

    Standard definition: Gaussian window (default 11 x 11, sigma 1.5),
    stabilizers C1 = (k1 * peak)^2 and C2 = (k2 * peak)^2, windows fully
    inside the image.  Both inputs must be 2-D and at least the window
    size in each dimension.
    """
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    if x.ndim != 2:
        raise ValueError(f"ssim needs 2-D images, got {x.ndim}-D")
    if min(x.shape) < window_size:
        raise ValueError(
            f"image {x.shape} smaller than the {window_size} pixel window")
    if not peak > 0:
        raise ValueError(f"peak must be positive, got {peak}")
    w = _gaussian_window(window_size, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu1 = convolve2d(x, w, mode="valid")
    mu2 = convolve2d(xhat, w, mode="valid")
    var1 = convolve2d(x * x, w, mode="valid") - mu1 * mu1
    var2 = convolve2d(xhat * xhat, w, mode="valid") - mu2 * mu2
    cov = convolve2d(x * xhat, w, mode="valid") - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


# ------------------------------------------------------------------ patches


@dataclass
class PatchGrid:
    """Geometry of an overlapping-patch extraction."""

    height: int
    width: int
    size: int
    row_starts: list
    col_starts: list

    @property
    def count(self):
        return len(self.row_starts) * len(self.col_starts)


def _starts(extent, size, stride):
    pos = list(range(0, extent - size + 1, stride))
    if pos[-1] != extent - size:
        pos.append(extent - size)  # final patch flush to the border
    return pos


def extract_patches(image, size=32, stride=4):
    """Slice a grayscale image into overlapping square patches.

    The patch grid is anchored at (0, 0) with the given stride; when the
    stride grid does not reach the far border, one extra row/column of
    patches is added flush to it so every pixel is covered.  Returns
    ``(patches, grid)`` where patches has one row-major-flattened patch
    per column, scanned in row-major grid order.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got {image.ndim}-D")
    h, wd = image.shape
    if h < size or wd < size:
        raise ValueError(
            f"image {image.shape} is smaller than the patch size {size}")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    rows = _starts(h, size, stride)
    cols = _starts(wd, size, stride)
    patches = np.empty((size * size, len(rows) * len(cols)))
    k = 0
    for i in rows:
        for j in cols:
            patches[:, k] = image[i:i + size, j:j + size].ravel()
            k += 1
    return patches, PatchGrid(h, wd, size, rows, cols)


def reconstruct_average(patches, grid):
    """Rebuild an image by averaging every pixel over covering patches."""
    patches = np.asarray(patches, dtype=float)
    expected = (grid.size * grid.size, grid.count)
    if patches.shape != expected:
        raise ValueError(
            f"patches have shape {patches.shape}, expected {expected}")
    acc = np.zeros((grid.height, grid.width))
    hits = np.zeros((grid.height, grid.width))
    k = 0
    for i in grid.row_starts:
        for j in grid.col_starts:
            acc[i:i + grid.size, j:j + grid.size] += \
                patches[:, k].reshape(grid.size, grid.size)
            hits[i:i + grid.size, j:j + grid.size] += 1.0
            k += 1
    return acc / hits


# ------------------------------------------------------------ serialization


def save_sensing(sensing, path):
    """Write a sensing problem in the URSM binary container.

    Layout, little-endian: magic ``URSM``, format version u32, m u32,
    n u32, seed u64, then A row-major float64.  The pseudo-inverse is
    recomputed on load rather than stored.
    """
    with open(path, "wb") as fh:
        fh.write(SENSING_MAGIC)
        fh.write(struct.pack("<IIIQ", SENSING_VERSION, sensing.m,
                             sensing.n, sensing.seed))
        fh.write(np.ascontiguousarray(sensing.A, dtype="<f8").tobytes())


def load_sensing(path):
    """Read a URSM container back into :class:`SensingProblem`.

    Raises
    ------
    ValueError
        On wrong magic, unsupported version, or truncated payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SENSING_MAGIC:
        raise ValueError(
            f"{path}: not a URSM sensing file (bad magic {blob[:4]!r})")
    if len(blob) < 24:
        raise ValueError(f"{path}: truncated sensing header")
    version, m, n, seed = struct.unpack_from("<IIIQ", blob, 4)
    if version != SENSING_VERSION:
        raise ValueError(f"{path}: unsupported sensing version {version}")
    if not 0 < m <= n:
        raise ValueError(f"{path}: invalid dimensions m={m} n={n}")
    if len(blob) != 24 + 8 * m * n:
        raise ValueError(
            f"{path}: payload is {len(blob) - 24} bytes, "
            f"expected {8 * m * n}")
    A = np.frombuffer(blob, dtype="<f8", count=m * n, offset=24)
    A = A.reshape(m, n).astype(np.float64)
    cf = cho_factor(A @ A.T, lower=True, check_finite=False)
    A_pinv = cho_solve(cf, A, check_finite=False).T
    return SensingProblem(A, A_pinv, m, n, int(seed))
