"""Reverse-mode tape over float64 numpy arrays.

Deliberately minimal: only the operations the models in this package need,
all deterministic, everything in 64-bit. Not a general autodiff framework.

Gradients flow only through branches that reach a Parameter; constant
branches record no backward work. `segment_sum` offers an `exact` mode
(correctly-rounded per-segment sums via math.fsum) whose result does not
depend on the within-segment order of the addends; inference uses it so
node relabelings permute outputs bit-exactly.
"""

import math

import numpy as np

from ..exceptions import ShapeMismatchError


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, parents=(), bwd=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter(Tensor):
    """Leaf tensor with a persistent gradient slot and a name."""

    __slots__ = ("name",)

    def __init__(self, name, data):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name!r}: non-finite initial values")
        super().__init__(arr)
        self.name = name

    def zero_grad(self):
        self.grad = None


def constant(data):
    return Tensor(np.asarray(data, dtype=np.float64))


def _as_tensor(x):
    return x if isinstance(x, Tensor) else constant(x)


def _tracks(*tensors):
    """True if any input sits on a path from a Parameter."""
    for t in tensors:
        if isinstance(t, Parameter) or t._bwd is not None or t._parents:
            return True
    return False


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _accum(t, g):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def backward(root):
    """Populate .grad on every tensor reachable from `root` (scalar)."""
    if root.data.size != 1:
        raise ShapeMismatchError("backward", "scalar loss", f"shape {root.data.shape}")
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


# ---------------------------------------------------------------------------
# elementwise / arithmetic

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def neg(a):
    a = _as_tensor(a)
    if not _tracks(a):
        return Tensor(-a.data)

    def bwd(g):
        _accum(a, -g)

    return Tensor(-a.data, (a,), bwd)


def exp(a):
    a = _as_tensor(a)
    out_data = np.exp(a.data)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g * out_data)

    return Tensor(out_data, (a,), bwd)


def log(a):
    a = _as_tensor(a)
    out_data = np.log(a.data)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g / a.data)

    return Tensor(out_data, (a,), bwd)


def clip(a, lo, hi):
    """Clamp values; gradient passes through inside [lo, hi], zero outside."""
    a = _as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    if not _tracks(a):
        return Tensor(out_data)
    mask = (a.data >= lo) & (a.data <= hi)

    def bwd(g):
        _accum(a, g * mask)

    return Tensor(out_data, (a,), bwd)


def where(mask, a, b):
    """Select by a constant boolean mask (not differentiable through mask)."""
    a, b = _as_tensor(a), _as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    out_data = np.where(mask, a.data, b.data)
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, _unbroadcast(np.where(mask, g, 0.0), a.data.shape))
        _accum(b, _unbroadcast(np.where(mask, 0.0, g), b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    pos = a.data > 0
    out_data = np.where(pos, a.data, slope * a.data)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, np.where(pos, g, slope * g))

    return Tensor(out_data, (a,), bwd)


def elu(a):
    a = _as_tensor(a)
    pos = a.data > 0
    expm1 = np.expm1(np.minimum(a.data, 0.0))
    out_data = np.where(pos, a.data, expm1)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, np.where(pos, g, g * (expm1 + 1.0)))

    return Tensor(out_data, (a,), bwd)


def sigmoid(a):
    a = _as_tensor(a)
    out_data = np.empty_like(a.data)
    pos = a.data >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return Tensor(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# shape / indexing

def reshape(a, shape):
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return Tensor(out_data, (a,), bwd)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    if not _tracks(*tensors):
        return Tensor(out_data)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return Tensor(out_data, tuple(tensors), bwd)


def gather_rows(a, idx):
    """Row lookup y = a[idx]; backward scatter-adds into the source rows."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    out_data = a.data[idx]
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        _accum(a, da)

    return Tensor(out_data, (a,), bwd)


def _fsum_segments(values, seg, n_segments):
    out = np.zeros((n_segments,) + values.shape[1:], dtype=np.float64)
    flat_vals = values.reshape(values.shape[0], -1)
    flat_out = out.reshape(n_segments, -1)
    buckets = [[] for _ in range(n_segments)]
    for row, s in enumerate(seg):
        buckets[s].append(row)
    ncols = flat_vals.shape[1]
    for s, rows in enumerate(buckets):
        if not rows:
            continue
        block = flat_vals[rows]
        for c in range(ncols):
            flat_out[s, c] = math.fsum(block[:, c].tolist())
    return out


def segment_sum(a, seg, n_segments, exact=False):
    """y[k] = sum over rows i with seg[i] == k.

    exact=True computes each segment with a correctly-rounded sum, which is
    independent of addend order (used at inference for exact permutation
    equivariance); the default accumulates in array order, which is fast and
    bit-reproducible for a fixed input ordering.
    """
    a = _as_tensor(a)
    seg = np.asarray(seg, dtype=np.intp)
    if exact:
        out_data = _fsum_segments(a.data, seg, n_segments)
    else:
        out_data = np.zeros((n_segments,) + a.data.shape[1:], dtype=np.float64)
        np.add.at(out_data, seg, a.data)
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g[seg])

    return Tensor(out_data, (a,), bwd)


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    if not _tracks(a):
        return Tensor(np.asarray(out_data, dtype=np.float64))

    def bwd(g):
        g_arr = np.asarray(g, dtype=np.float64)
        if axis is not None and not keepdims:
            g_arr = np.expand_dims(g_arr, axis)
        _accum(a, np.broadcast_to(g_arr, a.data.shape))

    return Tensor(np.asarray(out_data, dtype=np.float64), (a,), bwd)


def tmean(a, axis=None):
    a = _as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def transpose(a):
    a = _as_tensor(a)
    if not _tracks(a):
        return Tensor(a.data.T)

    def bwd(g):
        _accum(a, g.T)

    return Tensor(a.data.T, (a,), bwd)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(
            "matmul", "2-d operands with inner dims equal", f"{a.data.shape} @ {b.data.shape}"
        )
    out_data = a.data @ b.data
    if not _tracks(a, b):
        return Tensor(out_data)

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor(out_data, (a, b), bwd)


# ---------------------------------------------------------------------------
# spatial ops (3-d stacks); layouts are channels-first: (B, C, D, H, W)

def pad3d(a, pad):
    """Zero-pad the last three axes by `pad` on each side."""
    a = _as_tensor(a)
    widths = [(0, 0)] * (a.data.ndim - 3) + [(pad, pad)] * 3
    out_data = np.pad(a.data, widths)
    if not _tracks(a):
        return Tensor(out_data)
    sl = tuple([slice(None)] * (a.data.ndim - 3) + [slice(pad, -pad)] * 3)

    def bwd(g):
        _accum(a, g[sl])

    return Tensor(out_data, (a,), bwd)


def _conv3d_raw(x, w):
    win = np.lib.stride_tricks.sliding_window_view(x, w.shape[2:], axis=(-3, -2, -1))
    # win: (B, Cin, D', H', W', k, k, k); contract Cin and the window axes
    out = np.tensordot(win, w, axes=([1, 5, 6, 7], [1, 2, 3, 4]))
    # out: (B, D', H', W', Cout) -> (B, Cout, D', H', W')
    return np.ascontiguousarray(np.moveaxis(out, -1, 1)), win


def conv3d(a, w):
    """Valid 3-d convolution, stride 1. a: (B, Cin, D, H, W), w: (Cout, Cin, k, k, k)."""
    a, w = _as_tensor(a), _as_tensor(w)
    if a.data.ndim != 5 or w.data.ndim != 5:
        raise ShapeMismatchError("conv3d", "(B,Cin,D,H,W) and (Cout,Cin,k,k,k)",
                                 f"{a.data.shape} and {w.data.shape}")
    if a.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatchError("conv3d", f"input channels {w.data.shape[1]}",
                                 f"input channels {a.data.shape[1]}")
    k = w.data.shape[2]
    if min(a.data.shape[2:]) < k:
        raise ShapeMismatchError("conv3d", f"spatial dims >= kernel {k}",
                                 f"spatial dims {a.data.shape[2:]}")
    out_data, win = _conv3d_raw(a.data, w.data)
    if not _tracks(a, w):
        return Tensor(out_data)

    def bwd(g):
        # dW: contract batch and output-position axes
        dw = np.tensordot(g, win, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        _accum(w, dw)
        # dX: full convolution of g with the spatially-flipped kernel
        gp = np.pad(g, [(0, 0), (0, 0)] + [(k - 1, k - 1)] * 3)
        wf = np.ascontiguousarray(w.data[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4))
        da, _ = _conv3d_raw(gp, wf)
        _accum(a, da)

    return Tensor(out_data, (a, w), bwd)


def maxpool3d(a, window=2):
    """Non-overlapping max pooling, window == stride."""
    a = _as_tensor(a)
    if a.data.ndim != 5:
        raise ShapeMismatchError("maxpool3d", "(B,C,D,H,W)", f"{a.data.shape}")
    B, C, D, H, W = a.data.shape
    if D % window or H % window or W % window:
        raise ShapeMismatchError("maxpool3d", f"spatial dims divisible by {window}",
                                 f"spatial dims {(D, H, W)}")
    d, h, w_ = D // window, H // window, W // window
    view = a.data.reshape(B, C, d, window, h, window, w_, window)
    flat = view.transpose(0, 1, 2, 4, 6, 3, 5, 7).reshape(B, C, d, h, w_, window ** 3)
    arg = flat.argmax(axis=-1)
    out_data = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    if not _tracks(a):
        return Tensor(out_data)

    def bwd(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, arg[..., None], g[..., None], axis=-1)
        da = dflat.reshape(B, C, d, h, w_, window, window, window) \
                  .transpose(0, 1, 2, 5, 3, 6, 4, 7).reshape(B, C, D, H, W)
        _accum(a, da)

    return Tensor(out_data, (a,), bwd)


def upsample_nn3d(a, factor=2):
    """Nearest-neighbor upsampling of the last three axes."""
    a = _as_tensor(a)
    out_data = a.data.repeat(factor, axis=-3).repeat(factor, axis=-2).repeat(factor, axis=-1)
    if not _tracks(a):
        return Tensor(out_data)
    B, C, D, H, W = a.data.shape

    def bwd(g):
        da = g.reshape(B, C, D, factor, H, factor, W, factor).sum(axis=(3, 5, 7))
        _accum(a, da)

    return Tensor(out_data, (a,), bwd)
