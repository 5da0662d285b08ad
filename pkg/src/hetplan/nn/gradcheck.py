"""Central finite-difference verification of tape gradients."""

import numpy as np

from . import autodiff as ad


def numeric_grad(fn, param, step=1e-3):
    """Central-difference d fn / d param, perturbing one entry at a time.

    `fn` takes no arguments and returns a float computed from param.data.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        hi = fn()
        flat[i] = keep - step
        lo = fn()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric, floor=1e-4):
    """max |a - n| / max(floor, |a| + |n|) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(floor, np.abs(a) + np.abs(n))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(build_loss, params, step=1e-3):
    """Compare tape gradients of a scalar loss against central differences.

    `build_loss()` must rebuild the forward pass from the current parameter
    values and return the loss Tensor. Returns the max relative error over
    all parameters.
    """
    for p in params:
        p.zero_grad()
    loss = build_loss()
    ad.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numeric_grad(lambda: build_loss().item(), p, step=step)
        worst = max(worst, max_relative_error(analytic, numeric))
    return worst
