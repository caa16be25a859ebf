"""Augmented Lagrangian for un-rectified network training.

For training pairs (x_j, y_j), network parameters (W_l, b_l) and per-sample
splitting variables (u, v, d, s, t) with duals (mu1..mu4), the objective is

    L = 1/2 sum_j || y_j - (W_L v_j^{L-1} + b_L) ||^2
      + sum_{j,k} [ rho1/2 ||r1||^2 + rho2/2 ||r2||^2
                  + rho3/2 ||r3||^2 + rho4/2 ||r4||^2 ]
      + sum_{j,k} [ <mu1, r1> + <mu2, r2> + <mu3, r3> + <mu4, r4> ]
      + c1/2 sum_l ||W_l||_F^2 + c2/2 sum_{j,k} ||d||^2

with the residual families of :mod:`urnet.unrectify`:

    r1 = v - d*u,   r2 = u - (W_k v^{k-1} + b_k),
    r3 = d*u - s,   r4 = (1 - d)*u + t.

The outer loop :func:`cgt_train` alternates inexact inner minimization
(:func:`urnet.primal.inner_solve`) with first-order dual updates and a
hundred-fold penalty increase whenever feasibility lags, tightening the
inner tolerance ``omega`` and the feasibility tolerance ``eta`` along the
classic multiplier-method schedule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .unrectify import BatchState, residuals_batch, unrectify_forward_batch


class DivergenceError(RuntimeError):
    """Raised when the outer loop produces non-finite values."""


@dataclass
class PenaltyParams:
    """Penalty weights for the four constraint families plus regularizers.

    ``rho1`` pairs with r1, ``rho2`` with r2, ``rho3`` with r3, ``rho4``
    with r4; ``c1`` weights the Frobenius weight decay and ``c2`` the
    activation-weight decay.  Neither c is touched by the penalty schedule.
    """

    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 100.0
    rho4: float = 100.0
    c1: float = 1e-3
    c2: float = 1e-6

    def __post_init__(self):
        for name in ("rho1", "rho2", "rho3", "rho4", "c1", "c2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def scaled(self, rho_scale):
        """Penalties with all four rho multiplied by a common scale."""
        return PenaltyParams(
            rho1=self.rho1 * rho_scale,
            rho2=self.rho2 * rho_scale,
            rho3=self.rho3 * rho_scale,
            rho4=self.rho4 * rho_scale,
            c1=self.c1,
            c2=self.c2,
        )


@dataclass
class DualState:
    """Multiplier estimates, one array per residual entry (shape (N_k, N))."""

    mu1: list = field(default_factory=list)
    mu2: list = field(default_factory=list)
    mu3: list = field(default_factory=list)
    mu4: list = field(default_factory=list)

    @classmethod
    def zeros(cls, layer_dims, n_samples):
        hidden = layer_dims[1:-1]
        return cls(
            mu1=[np.zeros((nk, n_samples)) for nk in hidden],
            mu2=[np.zeros((nk, n_samples)) for nk in hidden],
            mu3=[np.zeros((nk, n_samples)) for nk in hidden],
            mu4=[np.zeros((nk, n_samples)) for nk in hidden],
        )

    def copy(self):
        return DualState(
            mu1=[a.copy() for a in self.mu1],
            mu2=[a.copy() for a in self.mu2],
            mu3=[a.copy() for a in self.mu3],
            mu4=[a.copy() for a in self.mu4],
        )


def _output_residual(net, state, Y):
    """Y - (W_L v^{L-1} + b_L), shape (N_L, N)."""
    vlast = state.v[-1]
    L = net.depth
    return Y - (net.weights[L - 1] @ vlast + net.biases[L - 1][:, None])


def auglag_parts(net, state, duals, pen, X, Y):
    """Objective split into its four groups of terms.

    Returns a dict with keys ``loss`` (data fit), ``penalty`` (quadratic
    constraint terms), ``linear`` (dual inner products) and ``reg``
    (c1/c2 decay).  Their sum is the augmented Lagrangian value.
    """
    res = residuals_batch(net, X, state)
    rout = _output_residual(net, state, Y)
    loss = 0.5 * float(np.sum(rout * rout))
    penalty = 0.0
    linear = 0.0
    rhos = (pen.rho1, pen.rho2, pen.rho3, pen.rho4)
    mus = (duals.mu1, duals.mu2, duals.mu3, duals.mu4)
    for fam, rho, mu in zip((res.r1, res.r2, res.r3, res.r4), rhos, mus):
        for k, rk in enumerate(fam):
            penalty += 0.5 * rho * float(np.sum(rk * rk))
            linear += float(np.sum(mu[k] * rk))
    reg = 0.5 * pen.c1 * sum(float(np.sum(w * w)) for w in net.weights)
    reg += 0.5 * pen.c2 * sum(float(np.sum(dk * dk)) for dk in state.d)
    return {"loss": loss, "penalty": penalty, "linear": linear, "reg": reg}


def eval_auglag(net, state, duals, pen, X, Y):
    """Augmented Lagrangian value at the given primal/dual point."""
    parts = auglag_parts(net, state, duals, pen, X, Y)
    return parts["loss"] + parts["penalty"] + parts["linear"] + parts["reg"]


def _grad_from_res(name, index, net, state, duals, pen, X, Y, res, rout):
    """Block gradient assembled from precomputed residual arrays."""
    L = net.depth
    if name in ("W", "b"):
        l = index
        if not 0 <= l < L:
            raise ValueError(f"weight layer index {l} out of range for depth {L}")
        if l == L - 1:
            if name == "W":
                return -rout @ state.v[-1].T + pen.c1 * net.weights[l]
            return -np.sum(rout, axis=1)
        coeff = pen.rho2 * res.r2[l] + duals.mu2[l]
        if name == "W":
            vprev = X if l == 0 else state.v[l - 1]
            return -coeff @ vprev.T + pen.c1 * net.weights[l]
        return -np.sum(coeff, axis=1)

    k = index
    if not 0 <= k < state.n_hidden:
        raise ValueError(f"hidden layer index {k} out of range")
    u, d = state.u[k], state.d[k]
    r1, r2, r3, r4 = res.r1[k], res.r2[k], res.r3[k], res.r4[k]
    mu1, mu2, mu3, mu4 = duals.mu1[k], duals.mu2[k], duals.mu3[k], duals.mu4[k]
    if name == "u":
        return (
            -pen.rho1 * d * r1
            + pen.rho2 * r2
            + pen.rho3 * d * r3
            + pen.rho4 * (1.0 - d) * r4
            - d * mu1
            + mu2
            + d * mu3
            + (1.0 - d) * mu4
        )
    if name == "v":
        g = pen.rho1 * r1 + mu1
        if k == state.n_hidden - 1:
            return g - net.weights[L - 1].T @ rout
        return g - net.weights[k + 1].T @ (pen.rho2 * res.r2[k + 1] + duals.mu2[k + 1])
    if name == "d":
        return (
            u * (-pen.rho1 * r1 - mu1 + pen.rho3 * r3 + mu3 - pen.rho4 * r4 - mu4)
            + pen.c2 * d
        )
    if name == "s":
        return -pen.rho3 * r3 - mu3
    if name == "t":
        return pen.rho4 * r4 + mu4
    raise ValueError(f"unknown block name {name!r}")


def grad_block(name, index, net, state, duals, pen, X, Y):
    """Analytic partial derivative of the objective for one block.

    Parameters
    ----------
    name : str
        One of ``"W"``, ``"b"`` (index 0..L-1) or ``"u"``, ``"v"``,
        ``"d"``, ``"s"``, ``"t"`` (hidden index 0..L-2).
    index : int
        Layer index as above.

    Returns
    -------
    ndarray
        Same shape as the block (per-sample blocks return the full
        (N_k, N) array; column j is sample j's gradient).
    """
    res = residuals_batch(net, X, state)
    rout = _output_residual(net, state, Y)
    return _grad_from_res(name, index, net, state, duals, pen, X, Y, res, rout)


def all_gradients(net, state, duals, pen, X, Y):
    """Every block gradient, keyed by (name, index)."""
    res = residuals_batch(net, X, state)
    rout = _output_residual(net, state, Y)
    grads = {}
    for l in range(net.depth):
        for name in ("W", "b"):
            grads[(name, l)] = _grad_from_res(
                name, l, net, state, duals, pen, X, Y, res, rout
            )
    for k in range(state.n_hidden):
        for name in ("u", "v", "d", "s", "t"):
            grads[(name, k)] = _grad_from_res(
                name, k, net, state, duals, pen, X, Y, res, rout
            )
    return grads


def project_bound(x, g, lower, upper):
    """First-order criticality measure for box-bounded coordinates.

    For a point ``x`` with objective gradient ``g`` and bounds
    ``lower <= x <= upper`` (either may be infinite), returns elementwise

        g           if lower < x - g < upper (or both bounds infinite),
        x - lower   if x - g <= lower,
        x - upper   if x - g >= upper.

    The result vanishes exactly at points satisfying the box KKT
    conditions; for unbounded coordinates it reduces to the gradient.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    diff = x - g
    out = np.where(diff <= lower, x - lower, np.where(diff >= upper, x - upper, g))
    return out if out.ndim else float(out)


# Bounds per block family: d lives in [0, 1], the slacks in [0, inf).
_BOUNDS = {
    "d": (0.0, 1.0),
    "s": (0.0, np.inf),
    "t": (0.0, np.inf),
}


def _block_value(name, index, net, state):
    if name == "W":
        return net.weights[index]
    if name == "b":
        return net.biases[index]
    return getattr(state, name)[index]


def kkt_residual(net, state, duals, pen, X, Y):
    """Norm of the projected gradient over every block.

    Unbounded blocks (W, b, u, v) contribute their raw gradient; d, s and
    t contribute the box-projected measure of :func:`project_bound`.
    Zero exactly at a first-order critical point of the bound-constrained
    objective.
    """
    total = 0.0
    grads = all_gradients(net, state, duals, pen, X, Y)
    for (name, index), g in grads.items():
        if name in _BOUNDS:
            lo, hi = _BOUNDS[name]
            p = project_bound(_block_value(name, index, net, state), g, lo, hi)
        else:
            p = g
        total += float(np.sum(np.square(p)))
    return float(np.sqrt(total))


def dual_update(duals, net, state, pen, X):
    """First-order multiplier step: mu_i += rho_i * r_i, returned as a copy."""
    res = residuals_batch(net, X, state)
    new = duals.copy()
    for k in range(state.n_hidden):
        new.mu1[k] += pen.rho1 * res.r1[k]
        new.mu2[k] += pen.rho2 * res.r2[k]
        new.mu3[k] += pen.rho3 * res.r3[k]
        new.mu4[k] += pen.rho4 * res.r4[k]
    return new


@dataclass
class CgtOptions:
    """Outer-loop schedule and inner-solve options.

    ``omega``/``eta`` start at ``omega0``/``eta0`` and tighten by the
    factor ``beta = min(1/rho_scale, beta_cap)`` after feasible steps
    (``omega *= beta``, ``eta *= beta**0.9``); infeasible steps multiply
    ``rho_scale`` by ``1/tau`` and reset ``omega = omega0 * beta``,
    ``eta = eta0 * beta**0.1``.  The loop stops once both the projected
    gradient falls below ``omega_star`` and the constraint norm below
    ``eta_star``, or after ``max_outer`` iterations.
    """

    omega_star: float = 1e-4
    eta_star: float = 1e-4
    max_outer: int = 200
    tau: float = 0.01
    omega0: float = 1.0
    eta0: float = 1.0
    beta_cap: float = 0.1
    rho_scale0: float = 1.0
    max_sweeps: int = 500
    clamp_v: bool = False
    deterministic: bool = False
    minibatch: int | None = None
    shuffle_seed: int = 0
    rho_scale_max: float = 1e30


@dataclass
class TraceRow:
    iter: int
    lagrangian: float
    loss: float
    constraint_norm: float
    kkt: float
    rho_scale: float
    omega: float
    eta: float


@dataclass
class TrainTrace:
    """Per-outer-iteration log of the training run.

    ``rows[k]`` holds the state after iteration k's inner solve, with the
    ``omega``/``eta``/``rho_scale`` that the inner solve targeted.
    ``branches[k]`` records which schedule branch followed ("feasible",
    "infeasible" or "converged"), and ``sweep_values[k]`` the objective
    after each inner sweep.
    """

    rows: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    sweep_values: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iter", "L", "loss", "constraint_norm", "kkt",
                 "rho_scale", "omega", "eta"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.iter, repr(r.lagrangian), repr(r.loss),
                     repr(r.constraint_norm), repr(r.kkt),
                     repr(r.rho_scale), repr(r.omega), repr(r.eta)]
                )


@dataclass
class TrainResult:
    net: object
    state: BatchState
    duals: DualState
    trace: TrainTrace
    converged: bool
    outer_iters: int
    rho_scale: float
    constraint_norm: float
    kkt: float


def cgt_train(net, X, Y, pen=None, opts=None):
    """Train by the multiplier method with closed-form inner sweeps.

    Parameters
    ----------
    net : NetworkParams
        Starting parameters; modified in place and also returned within
        the result.
    X, Y : ndarray
        Training inputs (N_0, N) and targets (N_L, N) as columns.
    pen : PenaltyParams, optional
        Base penalties; the schedule multiplies the four rho by a common
        growing scale and never touches c1/c2.
    opts : CgtOptions, optional

    Returns
    -------
    TrainResult
        Final parameters, splitting state, duals, trace and convergence
        flags.

    Raises
    ------
    DivergenceError
        If the objective or constraint norm turns non-finite, or the
        penalty scale exceeds ``opts.rho_scale_max``.
    """
    from . import primal  # deferred: primal builds on this module's objective

    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError(
            f"X and Y must be 2-D with matching sample counts, got "
            f"{X.shape} and {Y.shape}"
        )
    pen = pen or PenaltyParams()
    opts = opts or CgtOptions()

    state = unrectify_forward_batch(net, X)
    duals = DualState.zeros(net.layer_dims, X.shape[1])
    scale = opts.rho_scale0
    omega, eta = opts.omega0, opts.eta0
    trace = TrainTrace()
    converged = False
    cnorm = np.inf
    kkt = np.inf

    k = 0
    while k < opts.max_outer:
        eff = pen.scaled(scale)
        sweeps, _ = primal.inner_solve(
            net, state, duals, eff, X, Y, omega,
            max_sweeps=opts.max_sweeps, clamp_v=opts.clamp_v,
            deterministic=opts.deterministic, minibatch=opts.minibatch,
            shuffle_seed=opts.shuffle_seed + k,
        )
        cnorm = residuals_batch(net, X, state).norm()
        kkt = kkt_residual(net, state, duals, eff, X, Y)
        parts = auglag_parts(net, state, duals, eff, X, Y)
        lag = parts["loss"] + parts["penalty"] + parts["linear"] + parts["reg"]
        if not (np.isfinite(lag) and np.isfinite(cnorm)):
            raise DivergenceError(
                f"non-finite objective at outer iteration {k} "
                f"(L={lag}, ||c||={cnorm})"
            )
        trace.rows.append(TraceRow(k, lag, parts["loss"], cnorm, kkt,
                                   scale, omega, eta))
        trace.sweep_values.append(sweeps)

        if cnorm <= eta:
            if kkt <= opts.omega_star and cnorm <= opts.eta_star:
                trace.branches.append("converged")
                converged = True
                k += 1
                break
            trace.branches.append("feasible")
            duals = dual_update(duals, net, state, eff, X)
            beta = min(1.0 / scale, opts.beta_cap)
            omega = omega * beta
            eta = eta * beta**0.9
        else:
            trace.branches.append("infeasible")
            scale = scale / opts.tau
            if scale > opts.rho_scale_max:
                raise DivergenceError(
                    f"penalty scale {scale:.3g} exceeded limit "
                    f"{opts.rho_scale_max:.3g} without reaching feasibility"
                )
            beta = min(1.0 / scale, opts.beta_cap)
            omega = opts.omega0 * beta
            eta = opts.eta0 * beta**0.1
        k += 1

    return TrainResult(
        net=net, state=state, duals=duals, trace=trace, converged=converged,
        outer_iters=k, rho_scale=scale, constraint_norm=float(cnorm),
        kkt=float(kkt),
    )
