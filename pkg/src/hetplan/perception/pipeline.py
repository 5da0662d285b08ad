"""Observation pair -> heterogeneous task graph.

Wires together descriptor extraction, correspondence matching, the shape
encoder, and graph assembly; also embeds workspace constraint regions as
constraint nodes (region bounding geometry voxelized like an object).
"""

import numpy as np

from ..graph import build_graph
from .descriptors import node_embedding, shape_descriptor
from .matching import match_objects
from .voxel import voxelize

WALL_HEIGHT_CM = 18.0


def view_embedding(view, encoder):
    code = encoder.encode_one(view.grid)
    loc = (view.pose[0], view.pose[1], view.elevation)
    return node_embedding(code, loc)


def region_embedding(region, ws, encoder):
    """Constraint-node feature: encoded slab/wall geometry plus centroid."""
    xs = [c[0] for c in region.cells]
    ys = [c[1] for c in region.cells]
    w = max(xs) - min(xs) + 1
    d = max(ys) - min(ys) + 1
    if region.passable:
        height = max(ws.elevation(region.level), 1.0)
        base = 0.0
    else:
        height = WALL_HEIGHT_CM
        base = 0.0
    grid = voxelize("box", w, d, height)
    code = encoder.encode_one(grid)
    cx, cy = region.centroid()
    return node_embedding(code, (cx, cy, base + height / 2.0))


def observations_to_graph(obs_current, obs_goal, ws, encoder,
                          match_rng=None, match_noise=0.0):
    """Build the task graph for a (current, goal) observation pair.

    Returns (graph, correspondence). Current node k corresponds to
    obs_current.views[k]; goal node k to obs_goal.views[k].
    """
    cur_desc = [shape_descriptor(v, match_rng, match_noise) for v in obs_current.views]
    goal_desc = [shape_descriptor(v, match_rng, match_noise) for v in obs_goal.views]
    corr = match_objects(cur_desc, goal_desc)
    cur_embeds = [view_embedding(v, encoder) for v in obs_current.views]
    goal_embeds = [view_embedding(v, encoder) for v in obs_goal.views]
    con_embeds = [region_embedding(r, ws, encoder) for r in ws.regions]
    graph = build_graph(np.array(cur_embeds), np.array(goal_embeds),
                        np.array(con_embeds) if con_embeds else np.zeros((0, 15)),
                        corr)
    return graph, corr
