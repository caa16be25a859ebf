"""Comparator trainers: Adam backprop and penalty-method block descent.

Two reference optimizers for the same regression networks:

* :func:`adam_train` minimizes ``0.5 * ||Y - net(X)||_F^2`` plus the
  ``c1`` Frobenius weight penalty by plain backpropagation with Adam
  moment estimates.
* :func:`bcd_train` minimizes the penalty-method splitting of the same
  network: auxiliary pre-activations ``U_l`` and activations ``V_l``
  replace the nested composition, the equality constraints become
  quadratic penalties with a single fixed weight ``gamma``, and every
  block is updated by its exact minimizer in a cyclic sweep from the
  output layer backwards.  The per-component ``U`` update minimizes the
  two ReLU branches exactly and keeps the better one.

Both return the trained network plus a per-epoch objective trace and
raise :class:`~urnet.auglag.DivergenceError` when the objective stops
being finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .auglag import DivergenceError
from .model import NetworkParams, forward, relu
from .primal import _spd_solve


@dataclass
class AdamConfig:
    """Hyper-parameters for :func:`adam_train`."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int | None = None
    c1: float = 1e-3
    shuffle_seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for nm in ("beta1", "beta2"):
            b = getattr(self, nm)
            if not 0 < b < 1:
                raise ValueError(f"{nm} must lie in (0, 1), got {b}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if self.c1 < 0:
            raise ValueError(f"c1 must be nonnegative, got {self.c1}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(
                f"batch_size must be positive, got {self.batch_size}")


@dataclass
class BcdConfig:
    """Hyper-parameters for :func:`bcd_train`."""

    gamma: float = 1.0
    epochs: int = 100
    sweeps_per_epoch: int = 1
    c1: float = 1e-3

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if self.sweeps_per_epoch < 1:
            raise ValueError("sweeps_per_epoch must be at least 1, got "
                             f"{self.sweeps_per_epoch}")
        if self.c1 < 0:
            raise ValueError(f"c1 must be nonnegative, got {self.c1}")


@dataclass
class EpochRow:
    """One objective sample of a baseline run."""

    epoch: int
    objective: float


@dataclass
class BaselineTrace:
    """Objective value after every epoch (epoch 0 is the starting point)."""

    rows: list = field(default_factory=list)

    def append(self, epoch, objective):
        self.rows.append(EpochRow(epoch, float(objective)))

    def objectives(self):
        return np.array([r.objective for r in self.rows])

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write("epoch,objective\n")
            for r in self.rows:
                fh.write(f"{r.epoch},{r.objective!r}\n")


@dataclass
class BaselineResult:
    """Trained network plus its per-epoch trace."""

    net: NetworkParams
    trace: BaselineTrace


def regression_objective(net, X, Y, c1):
    """0.5 * sum of squared prediction errors plus the c1 weight penalty."""
    r = Y - forward(net, X)
    val = 0.5 * float(np.sum(r * r))
    val += 0.5 * c1 * sum(float(np.sum(w * w)) for w in net.weights)
    return val


def _backprop(net, X, Y, c1, scale):
    """Gradients of the (scaled) batch loss plus full c1 penalty.

    The data term is ``scale * 0.5 * ||Y - net(X)||^2`` so a mini-batch
    with ``scale = N / |B|`` yields an unbiased estimate of the
    full-objective gradient; the weight penalty enters un-scaled.
    """
    acts = [X]
    pre = []
    h = X
    for l in range(net.depth):
        u = net.weights[l] @ h + net.biases[l][:, None]
        pre.append(u)
        h = relu(u) if l < net.depth - 1 else u
        acts.append(h)
    g = scale * (acts[-1] - Y)
    grads_w, grads_b = [None] * net.depth, [None] * net.depth
    for l in range(net.depth - 1, -1, -1):
        grads_w[l] = g @ acts[l].T + c1 * net.weights[l]
        grads_b[l] = np.sum(g, axis=1)
        if l > 0:
            g = (net.weights[l].T @ g) * (pre[l - 1] > 0)
    return grads_w, grads_b


def adam_train(net, X, Y, cfg=None):
    """Train by backpropagation with Adam updates; returns a result.

    The input network is not modified.  One epoch is one pass over the
    data (a single full-batch step, or ``ceil(N / batch_size)``
    mini-batch steps with a seeded shuffle per epoch).  The trace holds
    the full objective after every epoch, starting with the initial
    value at epoch 0.
    """
    cfg = cfg or AdamConfig()
    net = net.copy()
    n = X.shape[1]
    m_w = [np.zeros_like(w) for w in net.weights]
    v_w = [np.zeros_like(w) for w in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]
    rng = np.random.default_rng(cfg.shuffle_seed)
    trace = BaselineTrace()
    obj = regression_objective(net, X, Y, cfg.c1)
    if not np.isfinite(obj):
        raise DivergenceError(f"initial objective is not finite: {obj}")
    trace.append(0, obj)
    t = 0
    for epoch in range(1, cfg.epochs + 1):
        if cfg.batch_size is None or cfg.batch_size >= n:
            batches = [slice(None)]
        else:
            order = rng.permutation(n)
            batches = [order[i:i + cfg.batch_size]
                       for i in range(0, n, cfg.batch_size)]
        for batch in batches:
            xb, yb = X[:, batch], Y[:, batch]
            scale = n / xb.shape[1]
            grads_w, grads_b = _backprop(net, xb, yb, cfg.c1, scale)
            t += 1
            bc1 = 1.0 - cfg.beta1 ** t
            bc2 = 1.0 - cfg.beta2 ** t
            for l in range(net.depth):
                for val, g, m, v in ((net.weights[l], grads_w[l], m_w, v_w),
                                     (net.biases[l], grads_b[l], m_b, v_b)):
                    m[l] = cfg.beta1 * m[l] + (1 - cfg.beta1) * g
                    v[l] = cfg.beta2 * v[l] + (1 - cfg.beta2) * g * g
                    step = (cfg.lr / bc1) * m[l] / (np.sqrt(v[l] / bc2)
                                                    + cfg.eps)
                    val -= step
        obj = regression_objective(net, X, Y, cfg.c1)
        if not np.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at epoch {epoch}: {obj}")
        trace.append(epoch, obj)
    return BaselineResult(net, trace)


def u_branch_minimize(v, m):
    """Exact componentwise minimizer of (v - relu(u))^2 + (u - m)^2.

    Evaluates both ReLU branches -- the affine one (u >= 0, relu(u) = u)
    and the dead one (u <= 0, relu(u) = 0) -- at their clipped
    stationary points and keeps the better, preferring the nonnegative
    branch on ties.  Works elementwise on arrays.
    """
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    u_pos = np.maximum(0.0, 0.5 * (v + m))
    f_pos = (v - u_pos) ** 2 + (u_pos - m) ** 2
    u_neg = np.minimum(0.0, m)
    f_neg = v * v + (u_neg - m) ** 2
    return np.where(f_pos <= f_neg, u_pos, u_neg)


def splitting_objective(net, U, V, X, Y, cfg):
    """Penalty-method objective of the split network.

    ``U[l]`` and ``V[l]`` (l = 0..L-2) carry the pre- and
    post-activations of hidden layer l+1 for every sample column.
    """
    prev = [X] + V[:-1]
    r = Y - (net.weights[-1] @ V[-1] + net.biases[-1][:, None])
    val = 0.5 * float(np.sum(r * r))
    for l in range(len(U)):
        a = V[l] - relu(U[l])
        b = U[l] - (net.weights[l] @ prev[l] + net.biases[l][:, None])
        val += cfg.gamma * (float(np.sum(a * a)) + float(np.sum(b * b)))
    val += 0.5 * cfg.c1 * sum(float(np.sum(w * w)) for w in net.weights)
    return val


def _bcd_sweep(net, U, V, X, Y, cfg, record=None):
    """One cyclic pass of exact block updates, output layer first."""
    L = net.depth

    def note(label):
        if record is not None:
            record.append((label, splitting_objective(net, U, V, X, Y, cfg)))

    vin = V[-1]
    gram = vin @ vin.T + cfg.c1 * np.eye(vin.shape[0])
    rhs = (Y - net.biases[-1][:, None]) @ vin.T
    net.weights[-1] = _spd_solve(gram, rhs.T).T
    note(f"W{L - 1}")
    net.biases[-1] = np.mean(Y - net.weights[-1] @ vin, axis=1)
    note(f"b{L - 1}")

    for l in range(L - 2, -1, -1):
        prev = X if l == 0 else V[l - 1]
        if l == L - 2:
            wout = net.weights[-1]
            A = wout.T @ wout + 2.0 * cfg.gamma * np.eye(wout.shape[1])
            rhs = wout.T @ (Y - net.biases[-1][:, None]) \
                + 2.0 * cfg.gamma * relu(U[l])
        else:
            wout = net.weights[l + 1]
            A = wout.T @ wout + np.eye(wout.shape[1])
            rhs = wout.T @ (U[l + 1] - net.biases[l + 1][:, None]) \
                + relu(U[l])
        V[l] = _spd_solve(A, rhs)
        note(f"v{l}")
        target = net.weights[l] @ prev + net.biases[l][:, None]
        U[l] = u_branch_minimize(V[l], target)
        note(f"u{l}")
        gram = 2.0 * cfg.gamma * (prev @ prev.T) \
            + cfg.c1 * np.eye(prev.shape[0])
        rhs = 2.0 * cfg.gamma * (U[l] - net.biases[l][:, None]) @ prev.T
        net.weights[l] = _spd_solve(gram, rhs.T).T
        note(f"W{l}")
        net.biases[l] = np.mean(U[l] - net.weights[l] @ prev, axis=1)
        note(f"b{l}")


def bcd_train(net, X, Y, cfg=None, record=None):
    """Train the split formulation by cyclic exact block descent.

    The input network is not modified.  ``U`` and ``V`` start feasible
    (the network's own pre- and post-activations), so the first recorded
    objective is the plain regression objective.  The trace holds the
    splitting objective after every epoch, starting at epoch 0; an
    optional ``record`` list collects ``(block label, objective)`` after
    every single block update for monotonicity checks.
    """
    cfg = cfg or BcdConfig()
    net = net.copy()
    U, V = [], []
    h = X
    for l in range(net.depth - 1):
        u = net.weights[l] @ h + net.biases[l][:, None]
        h = relu(u)
        U.append(u)
        V.append(h.copy())
    trace = BaselineTrace()
    obj = splitting_objective(net, U, V, X, Y, cfg)
    if not np.isfinite(obj):
        raise DivergenceError(f"initial objective is not finite: {obj}")
    trace.append(0, obj)
    for epoch in range(1, cfg.epochs + 1):
        for _ in range(cfg.sweeps_per_epoch):
            _bcd_sweep(net, U, V, X, Y, cfg, record=record)
        obj = splitting_objective(net, U, V, X, Y, cfg)
        if not np.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at epoch {epoch}: {obj}")
        trace.append(epoch, obj)
    return BaselineResult(net, trace)
