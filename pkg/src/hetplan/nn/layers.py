"""Layer objects built on the tape: dense, 3-d conv/pool, activations, softmax.

Shapes are validated up front and failures carry a dimension report.
Convolutions are valid (no padding), stride 1; pooling is window 2, stride 2,
matching the encoder arithmetic 32 -> 28 -> 14 -> 12 -> 6.
"""

import numpy as np

from ..exceptions import ShapeMismatchError
from . import autodiff as ad


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Dense:
    """y = x @ W^T + b for row-major inputs (rows x d_in)."""

    kind = "dense"

    def __init__(self, name, d_in, d_out, rng, bias=True):
        self.d_in = d_in
        self.d_out = d_out
        self.weight = ad.Parameter(f"{name}.weight", glorot(rng, (d_out, d_in), d_in, d_out))
        self.bias = ad.Parameter(f"{name}.bias", np.zeros(d_out)) if bias else None

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def __call__(self, x):
        x = ad._as_tensor(x)
        if x.data.ndim != 2 or x.data.shape[1] != self.d_in:
            raise ShapeMismatchError("dense", f"(rows, {self.d_in})", f"{x.data.shape}")
        y = ad.matmul(x, ad.transpose(self.weight))
        if self.bias is not None:
            y = ad.add(y, self.bias)
        return y


class Conv3d:
    kind = "conv3d"

    def __init__(self, name, c_in, c_out, kernel, rng):
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        fan_in = c_in * kernel ** 3
        self.weight = ad.Parameter(
            f"{name}.weight", glorot(rng, (c_out, c_in, kernel, kernel, kernel), fan_in, c_out))
        self.bias = ad.Parameter(f"{name}.bias", np.zeros(c_out))

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, x):
        y = ad.conv3d(x, self.weight)
        return ad.add(y, ad.reshape(self.bias, (1, self.c_out, 1, 1, 1)))


class MaxPool3d:
    kind = "maxpool3d"

    def __init__(self, window=2):
        self.window = window

    def parameters(self):
        return []

    def __call__(self, x):
        return ad.maxpool3d(x, self.window)


class Elu:
    kind = "elu"

    def parameters(self):
        return []

    def __call__(self, x):
        return ad.elu(x)


class LeakyRelu:
    kind = "leaky_relu"

    def __init__(self, slope=0.2):
        self.slope = slope

    def parameters(self):
        return []

    def __call__(self, x):
        return ad.leaky_relu(x, self.slope)


def softmax_rows(x):
    """Row-wise softmax, stable under constant shifts of a row."""
    x = ad._as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatchError("softmax_rows", "(rows, cols)", f"{x.data.shape}")
    shift = x.data.max(axis=1, keepdims=True)  # constant w.r.t. the tape
    e = ad.exp(ad.sub(x, ad.constant(shift)))
    return ad.div(e, ad.tsum(e, axis=1, keepdims=True))


def forward_layer(x, layer):
    """Run one layer on a raw array, returning a raw array (no tape kept)."""
    out = layer(ad.constant(np.asarray(x, dtype=np.float64)))
    return out.data


LAYER_KINDS = ("dense", "conv3d", "maxpool3d", "elu", "leaky_relu", "softmax_rows")
