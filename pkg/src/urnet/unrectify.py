"""Un-rectified representation of a ReLU network's hidden activity.

The rectifier is replaced, per hidden unit, by an activation weight
``d`` in [0, 1] together with split variables

    u : pre-activation            u = W v_prev + b
    v : post-activation           v = d * u
    s, t : nonnegative slacks     d*u - s = 0,  (1 - d)*u + t = 0

At any point satisfying all four constraints with s, t >= 0 and u != 0,
the two slack equations force d to be exactly 0 or 1, so the relaxed
representation collapses back to the rectifier.  ``d`` is set to 0 when
u = 0 (either choice is consistent there).

States come in two layouts: :class:`SampleState` holds one sample's
vectors, :class:`BatchState` holds a whole batch struct-of-arrays with
samples as columns.  The solver works on batches; per-sample views are
for inspection and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import relu


@dataclass
class SampleState:
    """Per-layer splitting variables for a single sample.

    Each field is a list over hidden layers k = 1..L-1 of 1-D arrays of
    length N_k.
    """

    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    d: list = field(default_factory=list)
    s: list = field(default_factory=list)
    t: list = field(default_factory=list)

    @property
    def n_hidden(self):
        return len(self.u)


@dataclass
class BatchState:
    """Splitting variables for N samples; arrays have shape (N_k, N)."""

    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    d: list = field(default_factory=list)
    s: list = field(default_factory=list)
    t: list = field(default_factory=list)

    @property
    def n_hidden(self):
        return len(self.u)

    @property
    def n_samples(self):
        return self.u[0].shape[1] if self.u else 0

    def sample(self, j):
        """View of sample j as a :class:`SampleState` (copies)."""
        return SampleState(
            u=[a[:, j].copy() for a in self.u],
            v=[a[:, j].copy() for a in self.v],
            d=[a[:, j].copy() for a in self.d],
            s=[a[:, j].copy() for a in self.s],
            t=[a[:, j].copy() for a in self.t],
        )

    @classmethod
    def from_samples(cls, samples):
        if not samples:
            raise ValueError("need at least one sample state")
        n_hidden = samples[0].n_hidden
        if any(st.n_hidden != n_hidden for st in samples):
            raise ValueError("sample states disagree on hidden layer count")
        return cls(
            u=[np.stack([st.u[k] for st in samples], axis=1) for k in range(n_hidden)],
            v=[np.stack([st.v[k] for st in samples], axis=1) for k in range(n_hidden)],
            d=[np.stack([st.d[k] for st in samples], axis=1) for k in range(n_hidden)],
            s=[np.stack([st.s[k] for st in samples], axis=1) for k in range(n_hidden)],
            t=[np.stack([st.t[k] for st in samples], axis=1) for k in range(n_hidden)],
        )

    def copy(self):
        return BatchState(
            u=[a.copy() for a in self.u],
            v=[a.copy() for a in self.v],
            d=[a.copy() for a in self.d],
            s=[a.copy() for a in self.s],
            t=[a.copy() for a in self.t],
        )


def activation_weights(u):
    """Binary activation pattern of a pre-activation array: 1 where u > 0."""
    return (u > 0.0).astype(np.float64)


def unrectify_forward_batch(net, X):
    """Forward pass that records the splitting variables for a batch.

    Parameters
    ----------
    net : NetworkParams
    X : ndarray, shape (N_0, N)

    Returns
    -------
    BatchState
        Feasible by construction: all four constraint residuals vanish
        and the recorded ``v`` of the last hidden layer reproduces the
        plain forward output through the final affine layer.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be (n, N), got shape {X.shape}")
    if X.shape[0] != net.weights[0].shape[1]:
        raise ValueError(
            f"input dimension {X.shape[0]} does not match network input "
            f"{net.weights[0].shape[1]}"
        )
    state = BatchState()
    vprev = X
    for k in range(net.depth - 1):
        u = net.weights[k] @ vprev + net.biases[k][:, None]
        d = activation_weights(u)
        v = d * u
        state.u.append(u)
        state.d.append(d)
        state.v.append(v)
        state.s.append(relu(u))
        state.t.append(relu(-u))
        vprev = v
    return state


def unrectify_forward(net, x):
    """Single-sample version of :func:`unrectify_forward_batch`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"x must be a vector, got shape {x.shape}")
    return unrectify_forward_batch(net, x[:, None]).sample(0)


@dataclass
class ConstraintResiduals:
    """The four constraint residual families, as per-layer arrays.

    r1 = v - d*u          (post-activation consistency)
    r2 = u - (W v_prev + b)   (pre-activation consistency)
    r3 = d*u - s          (lower slack)
    r4 = (1 - d)*u + t    (upper slack)
    """

    r1: list
    r2: list
    r3: list
    r4: list

    def stack(self):
        """All residual entries as one flat vector."""
        parts = [a.ravel() for fam in (self.r1, self.r2, self.r3, self.r4) for a in fam]
        return np.concatenate(parts) if parts else np.zeros(0)

    def norm(self):
        """Euclidean norm of the stacked residual vector."""
        return float(np.sqrt(sum(float(np.sum(a * a))
                                 for fam in (self.r1, self.r2, self.r3, self.r4)
                                 for a in fam)))

    def max_abs(self):
        return max(
            (float(np.max(np.abs(a)))
             for fam in (self.r1, self.r2, self.r3, self.r4) for a in fam),
            default=0.0,
        )


def residuals_batch(net, X, state):
    """Constraint residuals of a batch state against network and inputs."""
    X = np.asarray(X, dtype=np.float64)
    r1, r2, r3, r4 = [], [], [], []
    for k in range(state.n_hidden):
        u, v, d, s, t = state.u[k], state.v[k], state.d[k], state.s[k], state.t[k]
        vprev = X if k == 0 else state.v[k - 1]
        r1.append(v - d * u)
        r2.append(u - (net.weights[k] @ vprev + net.biases[k][:, None]))
        r3.append(d * u - s)
        r4.append((1.0 - d) * u + t)
    return ConstraintResiduals(r1, r2, r3, r4)


def residuals(net, x, state):
    """Single-sample constraint residuals (1-D arrays per layer)."""
    x = np.asarray(x, dtype=np.float64)
    batch = BatchState(
        u=[a[:, None] for a in state.u],
        v=[a[:, None] for a in state.v],
        d=[a[:, None] for a in state.d],
        s=[a[:, None] for a in state.s],
        t=[a[:, None] for a in state.t],
    )
    res = residuals_batch(net, x[:, None], batch)
    return ConstraintResiduals(
        r1=[a[:, 0] for a in res.r1],
        r2=[a[:, 0] for a in res.r2],
        r3=[a[:, 0] for a in res.r3],
        r4=[a[:, 0] for a in res.r4],
    )


@dataclass
class DichotomyReport:
    """Outcome of :func:`lemma1_check` over all hidden units."""

    checked: int
    passed: int
    failed: int
    skipped: int
    failures: list  # (layer, unit, sample, u, d) tuples

    @property
    def ok(self):
        return self.failed == 0


def lemma1_check(state, u_floor=1e-3, d_tol=1e-2):
    """Verify the activation dichotomy on a near-feasible state.

    Every unit whose pre-activation magnitude exceeds ``u_floor`` and
    whose local residuals (r1, r3, r4) are below ``d_tol * |u|`` must
    have ``d`` within ``d_tol`` of 0 or 1.  Units failing the residual
    or magnitude gates are skipped, not failed.

    Accepts a :class:`BatchState` or a :class:`SampleState`.
    """
    if isinstance(state, SampleState):
        state = BatchState(
            u=[a[:, None] for a in state.u],
            v=[a[:, None] for a in state.v],
            d=[a[:, None] for a in state.d],
            s=[a[:, None] for a in state.s],
            t=[a[:, None] for a in state.t],
        )
    checked = passed = skipped = 0
    failures = []
    for k in range(state.n_hidden):
        u, v, d, s, t = state.u[k], state.v[k], state.d[k], state.s[k], state.t[k]
        r1 = np.abs(v - d * u)
        r3 = np.abs(d * u - s)
        r4 = np.abs((1.0 - d) * u + t)
        local = np.maximum(np.maximum(r1, r3), r4)
        gate = (np.abs(u) > u_floor) & (local <= d_tol * np.abs(u))
        skipped += int(np.sum(~gate))
        dist = np.minimum(d, 1.0 - d)
        ok = dist <= d_tol
        checked += int(np.sum(gate))
        passed += int(np.sum(gate & ok))
        for i, j in zip(*np.nonzero(gate & ~ok)):
            failures.append((k, int(i), int(j), float(u[i, j]), float(d[i, j])))
    return DichotomyReport(
        checked=checked,
        passed=passed,
        failed=len(failures),
        skipped=skipped,
        failures=failures,
    )
