"""Central-difference verification of tape gradients."""
from __future__ import annotations

import numpy as np

from .errors import ContractViolation, NonFiniteError
from .tensor import Tape, backward


def grad_check(f, params, eps=1e-5, max_coords=8, seed=0, per_param=None):
    """Largest ``|analytic - numeric| / max(1, |analytic|)`` over sampled coordinates.

    ``f`` is a zero-argument callable returning a scalar Tensor built from
    ``params``. Up to ``max_coords`` coordinates per parameter are probed
    (all of them when the parameter is that small). If ``per_param`` is a
    dict it is filled with the worst error for each parameter name.
    """
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    for p in params:
        if p.dtype != np.float64:
            raise ContractViolation(f"grad_check needs float64 params, {p.name} is {p.dtype}")
        p.zero_grad()

    with Tape(check_finite=True) as tape:
        loss = f()
    if loss.requires_grad:
        backward(tape, loss)

    def evaluate():
        val = f().item()
        if not np.isfinite(val):
            raise NonFiniteError("loss", "during finite-difference probe")
        return val

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        analytic = p.grad.reshape(-1)
        p_worst = 0.0
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            fp = evaluate()
            flat[i] = orig - eps
            fm = evaluate()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]))
            p_worst = max(p_worst, err)
        if per_param is not None:
            per_param[p.name] = p_worst
        worst = max(worst, p_worst)
    return worst
