"""Closed-form block minimizers and the inner sweep of the multiplier method.

Every update below is the exact minimizer of the augmented Lagrangian of
:mod:`urnet.auglag` with respect to its own block, holding every other
block fixed:

* weights solve ridge-regularized normal equations,
* biases are residual means,
* u and d solve independent per-unit quadratics (d clipped to [0, 1]),
* v solves a small SPD system per layer,
* the slacks s, t are nonnegative projections of their stationary points.

A sweep visits the output layer first, then walks the hidden layers from
the last back to the first (v, d, u, s, t, then that layer's weights and
bias), always consuming the most recent values.  Exactness of each block
makes the objective non-increasing across every update of a full-batch
sweep, which the tests pin down.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .auglag import DualState, eval_auglag, kkt_residual
from .unrectify import BatchState


def _spd_solve(A, B):
    """Solve A X = B for SPD A, falling back to least squares if singular."""
    try:
        cf = cho_factor(A, lower=True, check_finite=False)
        return cho_solve(cf, B, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, B, rcond=None)[0]
    except ValueError:
        return np.linalg.lstsq(A, B, rcond=None)[0]


def _sample_mm(A, B, deterministic):
    """A @ B.T contracting the sample axis, optionally in fixed order.

    Both inputs have samples as columns.  In deterministic mode the sum
    over samples runs one column at a time in index order, making the
    result independent of BLAS threading.
    """
    if not deterministic:
        return A @ B.T
    out = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        out += np.outer(A[:, j], B[:, j])
    return out


def _vprev(state, X, k):
    return X if k == 0 else state.v[k - 1]


def update_w(net, state, duals, pen, X, Y, l, deterministic=False):
    """Exact ridge update of weight matrix l; returns the new matrix."""
    L = net.depth
    if l == L - 1:
        vlast = state.v[-1]
        B = _sample_mm(Y - net.biases[l][:, None], vlast, deterministic)
        A = _sample_mm(vlast, vlast, deterministic)
        A[np.diag_indices_from(A)] += pen.c1
        return _spd_solve(A, B.T).T
    vprev = _vprev(state, X, l)
    coeff = pen.rho2 * (state.u[l] - net.biases[l][:, None]) + duals.mu2[l]
    B = _sample_mm(coeff, vprev, deterministic)
    A = pen.rho2 * _sample_mm(vprev, vprev, deterministic)
    A[np.diag_indices_from(A)] += pen.c1
    return _spd_solve(A, B.T).T


def update_b(net, state, duals, pen, X, Y, l):
    """Exact bias update of layer l; returns the new vector."""
    L = net.depth
    if l == L - 1:
        return np.mean(Y - net.weights[l] @ state.v[-1], axis=1)
    vprev = _vprev(state, X, l)
    resid = state.u[l] - net.weights[l] @ vprev + duals.mu2[l] / pen.rho2
    return np.mean(resid, axis=1)


def update_d(state, duals, pen, k):
    """Exact per-unit activation-weight update, clipped to [0, 1]."""
    u, v, s, t = state.u[k], state.v[k], state.s[k], state.t[k]
    mu1, mu3, mu4 = duals.mu1[k], duals.mu3[k], duals.mu4[k]
    num = u * (pen.rho1 * v + pen.rho3 * s + pen.rho4 * (u + t)
               + mu1 - mu3 + mu4)
    den = (pen.rho1 + pen.rho3 + pen.rho4) * u * u + pen.c2
    # den can only vanish when u = 0 and c2 = 0, where the objective is
    # flat in d; the inactive-unit convention d = 0 applies there.
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(den > 0.0, num / den, 0.0)
    return np.clip(d, 0.0, 1.0)


def update_u(net, state, duals, pen, X, k):
    """Exact per-unit pre-activation update (diagonal linear system)."""
    v, d, s, t = state.v[k], state.d[k], state.s[k], state.t[k]
    mu1, mu2, mu3, mu4 = (duals.mu1[k], duals.mu2[k], duals.mu3[k],
                          duals.mu4[k])
    m = net.weights[k] @ _vprev(state, X, k) + net.biases[k][:, None]
    num = (pen.rho1 * d * v + pen.rho2 * m + pen.rho3 * d * s
           + pen.rho4 * (d - 1.0) * t
           + d * (mu1 - mu3) - mu2 - (1.0 - d) * mu4)
    den = (pen.rho1 + pen.rho3) * d * d + pen.rho2 + pen.rho4 * (1.0 - d) ** 2
    return num / den


def update_v(net, state, duals, pen, Y, k, clamp=False):
    """Post-activation update: SPD solve coupling layer k to layer k+1.

    The default solves the unconstrained system exactly.  With ``clamp``
    the solution is projected onto [0, inf); that projection is only the
    exact constrained minimizer when the system matrix is diagonal, so
    clamped mode trades block exactness for a rectified iterate.
    """
    L_out = state.n_hidden - 1
    du = state.d[k] * state.u[k]
    if k == L_out:
        W = net.weights[k + 1]
        A = W.T @ W
        A[np.diag_indices_from(A)] += pen.rho1
        rhs = (W.T @ (Y - net.biases[k + 1][:, None])
               + pen.rho1 * du - duals.mu1[k])
    else:
        W = net.weights[k + 1]
        A = pen.rho2 * (W.T @ W)
        A[np.diag_indices_from(A)] += pen.rho1
        rhs = (pen.rho2 * W.T @ (state.u[k + 1] - net.biases[k + 1][:, None])
               + pen.rho1 * du - duals.mu1[k] + W.T @ duals.mu2[k + 1])
    v = _spd_solve(A, rhs)
    return np.maximum(v, 0.0) if clamp else v


def update_s(state, duals, pen, k):
    """Exact lower-slack update: projection of d*u + mu3/rho3 onto [0, inf)."""
    return np.maximum(0.0, state.d[k] * state.u[k] + duals.mu3[k] / pen.rho3)


def update_t(state, duals, pen, k):
    """Exact upper-slack update: projection of (d-1)*u - mu4/rho4."""
    return np.maximum(
        0.0, (state.d[k] - 1.0) * state.u[k] - duals.mu4[k] / pen.rho4
    )


def _sweep_cols(net, state, duals, pen, X, Y, cols, clamp_v, deterministic,
                record):
    """One alternating pass over every block, restricted to sample columns.

    ``cols`` is a slice or index array selecting the mini-batch (the full
    batch uses ``slice(None)``).  Per-sample blocks update only those
    columns; weight and bias updates accumulate over them alone.  When
    ``record`` is a list, (label, objective) pairs are appended after
    every block update, evaluated on the full batch.
    """
    full = isinstance(cols, slice) and cols == slice(None)
    Xc = X if full else X[:, cols]
    Yc = Y if full else Y[:, cols]
    if full:
        sub_state, sub_duals = state, duals
    else:
        sub_state = BatchState(
            u=[a[:, cols] for a in state.u],
            v=[a[:, cols] for a in state.v],
            d=[a[:, cols] for a in state.d],
            s=[a[:, cols] for a in state.s],
            t=[a[:, cols] for a in state.t],
        )
        sub_duals = DualState(
            mu1=[a[:, cols] for a in duals.mu1],
            mu2=[a[:, cols] for a in duals.mu2],
            mu3=[a[:, cols] for a in duals.mu3],
            mu4=[a[:, cols] for a in duals.mu4],
        )

    def note(label):
        if record is not None:
            record.append((label, eval_auglag(net, state, duals, pen, X, Y)))

    def put(field, k, value):
        getattr(sub_state, field)[k][...] = value
        if not full:
            getattr(state, field)[k][:, cols] = sub_state_field(field, k)

    def sub_state_field(field, k):
        return getattr(sub_state, field)[k]

    L = net.depth
    net.weights[L - 1] = update_w(net, sub_state, sub_duals, pen, Xc, Yc,
                                  L - 1, deterministic)
    note(f"W[{L - 1}]")
    net.biases[L - 1] = update_b(net, sub_state, sub_duals, pen, Xc, Yc, L - 1)
    note(f"b[{L - 1}]")
    for k in range(state.n_hidden - 1, -1, -1):
        put("v", k, update_v(net, sub_state, sub_duals, pen, Yc, k,
                             clamp=clamp_v))
        note(f"v[{k}]")
        put("d", k, update_d(sub_state, sub_duals, pen, k))
        note(f"d[{k}]")
        put("u", k, update_u(net, sub_state, sub_duals, pen, Xc, k))
        note(f"u[{k}]")
        put("s", k, update_s(sub_state, sub_duals, pen, k))
        note(f"s[{k}]")
        put("t", k, update_t(sub_state, sub_duals, pen, k))
        note(f"t[{k}]")
        net.weights[k] = update_w(net, sub_state, sub_duals, pen, Xc, Yc, k,
                                  deterministic)
        note(f"W[{k}]")
        net.biases[k] = update_b(net, sub_state, sub_duals, pen, Xc, Yc, k)
        note(f"b[{k}]")


def inner_sweep(net, state, duals, pen, X, Y, clamp_v=False,
                deterministic=False, record=None):
    """One full-batch alternating pass; returns the post-sweep objective.

    Mutates ``net`` and ``state`` in place.  With ``record`` (a list),
    appends (block label, objective value) after every block update, which
    the monotonicity tests consume.
    """
    _sweep_cols(net, state, duals, pen, X, Y, slice(None), clamp_v,
                deterministic, record)
    return eval_auglag(net, state, duals, pen, X, Y)


def inner_solve(net, state, duals, pen, X, Y, omega, max_sweeps=500,
                clamp_v=False, deterministic=False, minibatch=None,
                shuffle_seed=0):
    """Sweep until the projected-gradient norm drops to ``omega``.

    Runs at least one sweep (unless ``max_sweeps`` is 0) and stops as soon
    as :func:`urnet.auglag.kkt_residual` is at most ``omega``, or after
    ``max_sweeps`` sweeps.  With ``minibatch`` set, each "sweep" is one
    epoch of mini-batch passes in a seeded shuffled order (experimental;
    per-batch weight updates are no longer exact full-objective block
    minimizers).

    Returns
    -------
    values : list of float
        Post-sweep objective values, one per sweep taken.
    converged : bool
        Whether the tolerance ``omega`` was reached (False when the sweep
        cap ran out, in particular for ``max_sweeps == 0``).
    """
    values = []
    converged = False
    n = X.shape[1]
    for sweep in range(max_sweeps):
        if minibatch is None or minibatch >= n:
            values.append(
                inner_sweep(net, state, duals, pen, X, Y, clamp_v=clamp_v,
                            deterministic=deterministic)
            )
        else:
            rng = np.random.default_rng(shuffle_seed + sweep)
            order = rng.permutation(n)
            for start in range(0, n, minibatch):
                cols = np.sort(order[start:start + minibatch])
                _sweep_cols(net, state, duals, pen, X, Y, cols, clamp_v,
                            deterministic, None)
            values.append(eval_auglag(net, state, duals, pen, X, Y))
        if kkt_residual(net, state, duals, pen, X, Y) <= omega:
            converged = True
            break
    return values, converged
