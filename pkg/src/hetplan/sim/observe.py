"""Ground-truth observation of a scene, standing in for RGB-D perception.

Full mode reports every object's shape grid, footprint, pose, and surface
elevation plus a cell-level instance map. The optional partial mode drops
voxels shadowed by taller objects along the +x view axis (camera on the
+x side looking toward -x), using bounding boxes as the blocking geometry.
"""

from dataclasses import dataclass

import numpy as np

from ..perception.voxel import voxel_centers, voxelize


@dataclass(frozen=True, eq=False)
class ObjectView:
    actuation_id: str    # handle for commanding primitives, not for matching
    shape: str
    footprint_w: float
    footprint_d: float
    height: float
    pose: tuple
    level: int
    elevation: float
    grid: np.ndarray     # 32^3 occupancy, possibly with occluded voxels dropped


@dataclass(frozen=True, eq=False)
class Observation:
    views: tuple
    instance_map: np.ndarray


def _occlusion_mask(obj, others, ws):
    """True entries = voxels of obj shadowed along +x by taller boxes."""
    cx, cy = obj.pose
    cz = ws.elevation(obj.level) + obj.height / 2.0
    local = voxel_centers(obj.footprint_w, obj.footprint_d, obj.height)
    wx = cx + local[0]
    wy = cy + local[1]
    wz = cz + local[2]
    shadow = np.zeros(wx.shape, dtype=bool)
    for other in others:
        r = other.rect()
        z0 = ws.elevation(other.level)
        z1 = z0 + other.height
        blocks = ((r[2] > wx) &
                  (wy > r[1]) & (wy < r[3]) &
                  (wz > z0) & (wz < z1))
        shadow |= blocks
    return shadow


def observe(state, occlusion=False):
    """Deterministic full observation; `occlusion` enables the partial mode."""
    ws = state.workspace
    instance_map = np.full((ws.width, ws.depth), -1, dtype=np.int64)
    views = []
    for idx, obj in enumerate(state.objects):
        grid = voxelize(obj.shape, obj.footprint_w, obj.footprint_d, obj.height)
        if occlusion:
            mask = _occlusion_mask(obj, state.others(obj.id), ws)
            grid = np.where(mask, 0.0, grid)
        x0, y0, x1, y1 = _cells(obj)
        instance_map[max(x0, 0):x1, max(y0, 0):y1] = idx
        views.append(ObjectView(
            actuation_id=obj.id, shape=obj.shape,
            footprint_w=obj.footprint_w, footprint_d=obj.footprint_d,
            height=obj.height, pose=obj.pose, level=obj.level,
            elevation=ws.elevation(obj.level), grid=grid))
    return Observation(views=tuple(views), instance_map=instance_map)


def _cells(obj):
    from .world import covered_cells
    return covered_cells(obj.rect())
