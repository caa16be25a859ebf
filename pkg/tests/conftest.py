"""Shared construction helpers for randomized test instances.

Everything is seeded through numpy's default_rng so every test run sees
identical data.  States built by `rand_state` are deliberately infeasible
(residuals nonzero) while still satisfying the box/sign invariants
d in [0,1], s >= 0, t >= 0.
"""

import numpy as np

from urnet.auglag import DualState, PenaltyParams
from urnet.model import NetworkParams
from urnet.unrectify import BatchState


def rand_net(rng, dims):
    weights = [rng.normal(0.0, 1.0, size=(dims[l + 1], dims[l]))
               for l in range(len(dims) - 1)]
    biases = [rng.normal(0.0, 1.0, size=dims[l + 1])
              for l in range(len(dims) - 1)]
    return NetworkParams(weights, biases)


def rand_state(rng, dims, n):
    hidden = dims[1:-1]
    return BatchState(
        u=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
        v=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
        d=[rng.uniform(0.0, 1.0, size=(nk, n)) for nk in hidden],
        s=[rng.uniform(0.0, 1.5, size=(nk, n)) for nk in hidden],
        t=[rng.uniform(0.0, 1.5, size=(nk, n)) for nk in hidden],
    )


def rand_duals(rng, dims, n):
    hidden = dims[1:-1]
    return DualState(
        mu1=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
        mu2=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
        mu3=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
        mu4=[rng.normal(0.0, 1.0, size=(nk, n)) for nk in hidden],
    )


def rand_penalties(rng):
    return PenaltyParams(
        rho1=float(rng.uniform(0.5, 2.0)),
        rho2=float(rng.uniform(0.5, 2.0)),
        rho3=float(rng.uniform(50.0, 200.0)),
        rho4=float(rng.uniform(50.0, 200.0)),
        c1=float(rng.uniform(1e-4, 1e-2)),
        c2=float(rng.uniform(1e-7, 1e-5)),
    )


def rand_instance(seed, dims=(2, 3, 2), n=3, default_pen=False):
    """Full random problem instance keyed by a single seed.

    Returns a dict with net, X, Y, state, duals, pen.  The draw order is
    fixed; changing it would invalidate frozen expected values.
    """
    rng = np.random.default_rng(seed)
    dims = list(dims)
    net = rand_net(rng, dims)
    X = rng.normal(0.0, 1.0, size=(dims[0], n))
    Y = rng.normal(0.0, 1.0, size=(dims[-1], n))
    state = rand_state(rng, dims, n)
    duals = rand_duals(rng, dims, n)
    pen = PenaltyParams() if default_pen else rand_penalties(rng)
    return {"net": net, "X": X, "Y": Y, "state": state, "duals": duals,
            "pen": pen, "dims": dims, "n": n}
