"""Shape/size descriptors and node embeddings.

The 10-dim descriptor replaces learned image features for matching: it is a
deterministic function of an object's observed geometry (absolute size,
surface elevation, normalized-grid fill and second moments). Optional
Gaussian noise emulates perception error.
"""

import numpy as np

from ..graph import EMBEDDING_DIM  # noqa: F401  (re-exported for callers)

DESCRIPTOR_DIM = 10


def shape_descriptor(view, rng=None, noise_sigma=0.0):
    """10-dim descriptor of an ObjectView; identical grids + geometry give
    identical descriptors."""
    grid = view.grid
    count = float(grid.sum())
    fill = count / grid.size
    if count > 0:
        idx = np.argwhere(grid > 0).astype(np.float64)
        centered = idx - idx.mean(axis=0)
        cov = centered.T @ centered / len(idx)
        eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
        moments = np.sqrt(np.maximum(eig, 0.0)) / grid.shape[0]
    else:
        moments = np.zeros(3)
    w, d, h = view.footprint_w, view.footprint_d, view.height
    desc = np.array([
        fill,
        w, d, h,
        view.elevation,
        moments[0], moments[1], moments[2],
        w / d,
        h / max(w, d),
    ], dtype=np.float64)
    if noise_sigma > 0.0 and rng is not None:
        desc = desc + rng.normal(0.0, noise_sigma, size=DESCRIPTOR_DIM)
    return desc


def node_embedding(shape_code, location):
    """concat(shape_code[12], location[3]) -> 15-dim node feature.

    Order is fixed: the 12 learned shape dims first, then (x, y, elevation)
    in cm.
    """
    code = np.asarray(shape_code, dtype=np.float64).reshape(-1)
    loc = np.asarray(location, dtype=np.float64).reshape(-1)
    if code.size != 12 or loc.size != 3:
        raise ValueError(f"expected 12-dim code and 3-dim location, "
                         f"got {code.size} and {loc.size}")
    return np.concatenate([code, loc])
