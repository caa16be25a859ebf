"""Dense ReLU network container, forward evaluation and checkpoint I/O.

A network with ``L`` layers maps an input ``x`` through ``L - 1`` hidden
affine-plus-ReLU stages followed by one affine output stage:

    v0 = x
    u_l = W_l v_{l-1} + b_l,  v_l = relu(u_l)    for l = 1..L-1
    output = W_L v_{L-1} + b_L

All parameters are float64 and all matrices are dense.  Samples are stored
as columns, so a batch of ``N`` inputs has shape ``(n, N)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"URNW"
CHECKPOINT_VERSION = 1


def relu(x):
    """Elementwise rectifier max(0, x)."""
    return np.maximum(x, 0.0)


@dataclass
class NetworkParams:
    """Weights and biases of an L-layer dense ReLU network.

    Parameters
    ----------
    weights : list of ndarray
        ``weights[l]`` has shape ``(dims[l+1], dims[l])`` for the layer
        dimension sequence ``dims``.
    biases : list of ndarray
        ``biases[l]`` has shape ``(dims[l+1],)``.

    Raises
    ------
    ValueError
        If fewer than two layers are given, if weight/bias counts differ,
        or if consecutive layer shapes are incompatible.
    """

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError(
                f"got {len(self.weights)} weight matrices but "
                f"{len(self.biases)} bias vectors"
            )
        if len(self.weights) < 2:
            raise ValueError("a network needs at least two layers")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2:
                raise ValueError(f"weights[{l}] must be a matrix, got ndim={w.ndim}")
            if b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ValueError(
                    f"biases[{l}] has shape {b.shape}, expected ({w.shape[0]},)"
                )
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(
                    f"weights[{l}] expects input of size {w.shape[1]} but layer "
                    f"{l - 1} produces size {self.weights[l - 1].shape[0]}"
                )

    @property
    def depth(self):
        """Number of affine layers L."""
        return len(self.weights)

    @property
    def layer_dims(self):
        """Dimension sequence (N_0, N_1, ..., N_L)."""
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self):
        return NetworkParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )


def init_gaussian(layer_dims, sigma=0.01, seed=0):
    """Fresh network with i.i.d. N(0, sigma^2) weights and zero biases.

    Parameters
    ----------
    layer_dims : sequence of int
        Dimension sequence (N_0, ..., N_L); needs at least three entries.
    sigma : float
        Weight standard deviation; must be positive.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise ValueError("layer_dims needs at least three entries (L >= 2)")
    if any(d <= 0 for d in dims):
        raise ValueError(f"layer dimensions must be positive, got {dims}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    weights = [
        rng.normal(0.0, sigma, size=(dims[l + 1], dims[l]))
        for l in range(len(dims) - 1)
    ]
    biases = [np.zeros(dims[l + 1]) for l in range(len(dims) - 1)]
    return NetworkParams(weights, biases)


def forward(net, x):
    """Evaluate the network on one sample ``(n,)`` or a batch ``(n, N)``.

    Hidden layers apply ReLU; the final layer is affine only.  The result
    has the same number of axes as ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    v = x[:, None] if single else x
    if v.shape[0] != net.weights[0].shape[1]:
        raise ValueError(
            f"input has dimension {v.shape[0]}, network expects "
            f"{net.weights[0].shape[1]}"
        )
    L = net.depth
    for l in range(L - 1):
        v = relu(net.weights[l] @ v + net.biases[l][:, None])
    out = net.weights[L - 1] @ v + net.biases[L - 1][:, None]
    return out[:, 0] if single else out


def save_checkpoint(net, path):
    """Write the network to ``path`` in the URNW binary format.

    Layout, all little-endian: magic ``URNW``, format version u32, layer
    count L u32, dims N_0..N_L u32, then every weight matrix row-major
    float64 in layer order, then every bias vector float64 in layer order.
    """
    dims = net.layer_dims
    L = net.depth
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, L))
        fh.write(struct.pack(f"<{L + 1}I", *dims))
        for w in net.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for b in net.biases:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a URNW checkpoint back into :class:`NetworkParams`.

    Raises
    ------
    ValueError
        On wrong magic, unsupported version, or truncated payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a URNW checkpoint (bad magic {blob[:4]!r})")
    if len(blob) < 12:
        raise ValueError(f"{path}: truncated checkpoint header")
    version, L = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if L < 2:
        raise ValueError(f"{path}: invalid layer count {L}")
    off = 12
    if len(blob) < off + 4 * (L + 1):
        raise ValueError(f"{path}: truncated dimension table")
    dims = struct.unpack_from(f"<{L + 1}I", blob, off)
    off += 4 * (L + 1)
    if any(d == 0 for d in dims):
        raise ValueError(f"{path}: zero layer dimension in {dims}")
    need = 8 * sum(dims[l + 1] * dims[l] for l in range(L))
    need += 8 * sum(dims[l + 1] for l in range(L))
    if len(blob) != off + need:
        raise ValueError(
            f"{path}: payload is {len(blob) - off} bytes, expected {need}"
        )
    weights = []
    for l in range(L):
        count = dims[l + 1] * dims[l]
        w = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        weights.append(w.reshape(dims[l + 1], dims[l]).astype(np.float64))
        off += 8 * count
    biases = []
    for l in range(L):
        b = np.frombuffer(blob, dtype="<f8", count=dims[l + 1], offset=off)
        biases.append(b.astype(np.float64))
        off += 8 * dims[l + 1]
    return NetworkParams(weights, biases)
