"""Object-centered, scale-normalized occupancy grids.

Grids are pose-invariant by construction (object frame) and normalized so
the largest dimension spans the full grid; absolute size travels separately
in the shape descriptor. Identical geometry always yields identical grids.
"""

import numpy as np

from ..exceptions import SceneError

RESOLUTION = 32
_EPS = 1e-9


def voxel_centers(w, d, h, resolution=RESOLUTION):
    """Voxel-center coordinate grids in object-local cm (x, y, z)."""
    scale = max(w, d, h) / resolution
    line = (np.arange(resolution) + 0.5 - resolution / 2.0) * scale
    return (line[:, None, None] + np.zeros((1, resolution, resolution)),
            line[None, :, None] + np.zeros((resolution, 1, resolution)),
            line[None, None, :] + np.zeros((resolution, resolution, 1)))


def voxelize(shape, w, d, h, resolution=RESOLUTION):
    """32^3 binary grid (float64 0/1) for a box or cylinder of w x d x h cm."""
    if min(w, d, h) <= 0:
        raise SceneError(f"cannot voxelize degenerate shape {w}x{d}x{h}")
    x, y, z = voxel_centers(w, d, h, resolution)
    inside_z = np.abs(z) <= h / 2.0 + _EPS
    if shape == "box":
        occ = (np.abs(x) <= w / 2.0 + _EPS) & (np.abs(y) <= d / 2.0 + _EPS) & inside_z
    elif shape == "cylinder":
        occ = ((x / (w / 2.0)) ** 2 + (y / (d / 2.0)) ** 2 <= 1.0 + _EPS) & inside_z
    else:
        raise SceneError(f"unknown shape kind {shape!r}")
    grid = occ.astype(np.float64)
    if not grid.any():
        raise SceneError(f"empty voxel grid for {shape} {w}x{d}x{h}")
    return grid
