"""Training losses: binary cross-entropy, Huber, and their weighted sum.

Defaults: Huber transition at 1.15, action-term weight 0.65.
"""

import numpy as np

from . import autodiff as ad

BCE_EPS = 1e-7
HUBER_DELTA = 1.15
ACTION_WEIGHT = 0.65


def binary_cross_entropy(p, y):
    """-(y*log p + (1-y)*log(1-p)) with p clamped to [eps, 1-eps].

    Accepts scalars or arrays (elementwise). Values outside [0, 1] before
    clamping are rejected.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr < 0.0) or np.any(p_arr > 1.0):
        raise ValueError(f"probability outside [0, 1]: {p_arr}")
    pc = np.clip(p_arr, BCE_EPS, 1.0 - BCE_EPS)
    y_arr = np.asarray(y, dtype=np.float64)
    out = -(y_arr * np.log(pc) + (1.0 - y_arr) * np.log1p(-pc))
    return float(out) if out.ndim == 0 else out


def huber(y_hat, y, delta=HUBER_DELTA):
    """0.5*r^2 for |r| < delta, else delta*(|r| - 0.5*delta), r = y - y_hat."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    r = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite residual")
    a = np.abs(r)
    out = np.where(a < delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def combined(object_loss, action_loss, action_weight=ACTION_WEIGHT):
    """object_loss + action_weight * action_loss."""
    total = object_loss + action_weight * action_loss
    if not np.isfinite(total):
        raise ValueError("non-finite combined loss")
    return float(total)


# --- tape versions (same formulas, differentiable) -------------------------

def _reduce(elems, weights):
    if weights is None:
        return ad.tmean(elems)
    return ad.tsum(ad.mul(elems, ad.constant(np.asarray(weights, dtype=np.float64))))


def bce_t(p, y, weights=None):
    """BCE on a tape tensor of probabilities; mean, or weighted sum."""
    pc = ad.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    y_c = ad.constant(np.asarray(y, dtype=np.float64))
    pos = ad.mul(y_c, ad.log(pc))
    neg_ = ad.mul(ad.sub(1.0, y_c), ad.log(ad.sub(1.0, pc)))
    return _reduce(ad.neg(ad.add(pos, neg_)), weights)


def huber_t(y_hat, y, delta=HUBER_DELTA, weights=None):
    """Huber on a tape tensor of predictions; mean, or weighted sum."""
    r = ad.sub(ad.constant(np.asarray(y, dtype=np.float64)), y_hat)
    absr = ad.where(r.data < 0, ad.neg(r), r)
    quad = ad.mul(0.5, ad.mul(r, r))
    lin = ad.mul(delta, ad.sub(absr, 0.5 * delta))
    return _reduce(ad.where(np.abs(r.data) < delta, quad, lin), weights)


def combined_t(object_loss, action_loss, action_weight=ACTION_WEIGHT):
    return ad.add(object_loss, ad.mul(action_weight, action_loss))
