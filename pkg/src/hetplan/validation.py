"""Input validation helpers used by the estimator-style classes."""

import inspect
import os

import numpy as np

from .exceptions import NotFittedError, ShapeMismatchError


def check_array(x, name, ndim=None, shape=None, dtype=np.float64, finite=True):
    """Coerce to a float64 ndarray and validate dimensionality.

    `shape` entries of None are wildcards. Raises ShapeMismatchError with a
    dimension report on any mismatch.
    """
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeMismatchError(name, f"{ndim}-d array", f"{arr.ndim}-d array {arr.shape}")
    if shape is not None:
        if arr.ndim != len(shape):
            raise ShapeMismatchError(name, f"shape {shape}", f"shape {arr.shape}")
        for want, have in zip(shape, arr.shape):
            if want is not None and want != have:
                raise ShapeMismatchError(name, f"shape {shape}", f"shape {arr.shape}")
    if finite and arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def check_is_fitted(estimator, attr):
    if getattr(estimator, attr, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() or load a checkpoint first"
        )


def check_random_state(seed):
    """Return a numpy Generator for an int seed, Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def worker_count():
    """Parallelism cap from HETPLAN_THREADS (defaults to os.cpu_count())."""
    raw = os.environ.get("HETPLAN_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)


class ParamsMixin:
    """Minimal sklearn-style get_params/set_params.

    Parameters are exactly the keyword arguments of __init__, stored under
    the same attribute names. Compatible with sklearn.clone-style usage.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
