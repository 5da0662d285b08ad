"""Primitive semantics: PUSH (straight segments at constant level, cost 1
per segment) and PICK-PLACE (cost 3, may change level).

Swept-footprint collision is exact for axis-aligned rectangles translated
along a segment: an obstacle rectangle (or off-level / impassable cell,
or the workspace border) collides with the sweep iff the segment of center
positions enters the obstacle inflated by the mover's half-dimensions.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from ..exceptions import NotGraspable, PushInfeasible, SceneError, TargetOccupied
from .world import (GEOM_EPS, PICK_PLACE_COST, PUSH_COST, cells_support,
                    covered_cells, placement_free, rects_overlap)

PUSH = "PUSH"
PICK_PLACE = "PICK_PLACE"


@dataclass(frozen=True)
class Primitive:
    kind: str            # PUSH | PICK_PLACE
    object_id: str
    target_pose: tuple
    target_level: int
    cost: int
    waypoints: tuple = ()


def is_graspable(obj, ws):
    """The gripper straddles the smaller footprint dimension (inclusive)."""
    return min(obj.footprint_w, obj.footprint_d) <= ws.gripper_opening + GEOM_EPS


def _segment_hits_boxes(p0, p1, lo, hi, eps=GEOM_EPS):
    """Vectorized strict-interior segment vs AABB test (slab method).

    lo, hi: (n, 2) arrays of box corners. Boxes are shrunk by eps so mere
    touching does not count as a hit.
    """
    if len(lo) == 0:
        return False
    p0 = np.asarray(p0, dtype=np.float64)
    d = np.asarray(p1, dtype=np.float64) - p0
    lo = lo + eps
    hi = hi - eps
    t0 = np.zeros(len(lo))
    t1 = np.ones(len(lo))
    ok = np.ones(len(lo), dtype=bool)
    for axis in range(2):
        if abs(d[axis]) < 1e-12:
            ok &= (p0[axis] > lo[:, axis]) & (p0[axis] < hi[:, axis])
        else:
            ta = (lo[:, axis] - p0[axis]) / d[axis]
            tb = (hi[:, axis] - p0[axis]) / d[axis]
            tmin = np.minimum(ta, tb)
            tmax = np.maximum(ta, tb)
            t0 = np.maximum(t0, tmin)
            t1 = np.minimum(t1, tmax)
    return bool(np.any(ok & (t0 < t1)))


def _merge_cells_to_boxes(bad):
    """Decompose a boolean cell mask into maximal-run rectangles."""
    boxes = []
    open_runs = {}
    W, D = bad.shape
    for x in range(W):
        col = bad[x]
        runs = []
        y = 0
        while y < D:
            if col[y]:
                y0 = y
                while y < D and col[y]:
                    y += 1
                runs.append((y0, y))
            else:
                y += 1
        next_open = {}
        for (y0, y1) in runs:
            if (y0, y1) in open_runs:
                x_start = open_runs.pop((y0, y1))
            else:
                x_start = x
            next_open[(y0, y1)] = x_start
        for (y0, y1), x_start in open_runs.items():
            boxes.append((x_start, y0, x, y1))
        open_runs = next_open
    for (y0, y1), x_start in open_runs.items():
        boxes.append((x_start, y0, W, y1))
    return boxes


def _inflated_obstacles(state, mover, level):
    """AABBs that the mover's center must avoid while sliding at `level`."""
    hw, hd = mover.footprint_w / 2.0, mover.footprint_d / 2.0
    lo, hi = [], []
    for other in state.objects:
        if other.id == mover.id or other.level != level:
            continue
        r = other.rect()
        lo.append((r[0] - hw, r[1] - hd))
        hi.append((r[2] + hw, r[3] + hd))
    ws = state.workspace
    bad = (ws.height_map != level) | ws.impassable
    for (x0, y0, x1, y1) in _merge_cells_to_boxes(bad):
        lo.append((x0 - hw, y0 - hd))
        hi.append((x1 + hw, y1 + hd))
    if not lo:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)


def _batch_visible(p0, pts, lo, hi, eps=GEOM_EPS):
    """For each point in pts: is the segment p0 -> point obstacle-free?"""
    n = len(pts)
    if len(lo) == 0:
        return np.ones(n, dtype=bool)
    p0 = np.asarray(p0, dtype=np.float64)
    d = pts - p0
    t0 = np.zeros((n, len(lo)))
    t1 = np.ones((n, len(lo)))
    ok = np.ones((n, len(lo)), dtype=bool)
    for axis in range(2):
        lo_a = lo[:, axis] + eps
        hi_a = hi[:, axis] - eps
        da = d[:, axis][:, None]
        par = np.abs(da) < 1e-12
        inside = (p0[axis] > lo_a) & (p0[axis] < hi_a)
        safe = np.where(par, 1.0, da)
        ta = (lo_a[None, :] - p0[axis]) / safe
        tb = (hi_a[None, :] - p0[axis]) / safe
        t0 = np.where(par, t0, np.maximum(t0, np.minimum(ta, tb)))
        t1 = np.where(par, t1, np.minimum(t1, np.maximum(ta, tb)))
        ok &= np.where(par, inside[None, :], True)
    return ~np.any(ok & (t0 < t1), axis=1)


def _center_inside(p, mover, ws):
    hw, hd = mover.footprint_w / 2.0, mover.footprint_d / 2.0
    return (hw - GEOM_EPS <= p[0] <= ws.width - hw + GEOM_EPS and
            hd - GEOM_EPS <= p[1] <= ws.depth - hd + GEOM_EPS)


def _segment_clear(state, mover, level, p0, p1, lo=None, hi=None):
    ws = state.workspace
    if not (_center_inside(p0, mover, ws) and _center_inside(p1, mover, ws)):
        return False
    if lo is None:
        lo, hi = _inflated_obstacles(state, mover, level)
    return not _segment_hits_boxes(p0, p1, lo, hi)


def direct_push_path_exists(state, object_id, target_pose, target_level=None):
    """Straight constant-level slide from current pose to target.

    True iff the swept footprint stays on cells of the object's level,
    avoids impassable cells and the workspace border, and crosses no other
    object's footprint. A target on a different level is never reachable.
    """
    mover = state.obj(object_id)
    if target_level is not None and target_level != mover.level:
        return False
    tgt = (float(target_pose[0]), float(target_pose[1]))
    if not cells_support(state.workspace, mover.rect(tgt), mover.level):
        return False
    return _segment_clear(state, mover, mover.level, mover.pose, tgt)


def _feasible_lattice(state, mover, level):
    """Boolean mask over integer-cm centers where the mover can stand."""
    ws = state.workspace
    hw, hd = mover.footprint_w / 2.0, mover.footprint_d / 2.0
    xs = np.arange(ws.width + 1, dtype=np.float64)
    ys = np.arange(ws.depth + 1, dtype=np.float64)
    okx = (xs >= hw - GEOM_EPS) & (xs <= ws.width - hw + GEOM_EPS)
    oky = (ys >= hd - GEOM_EPS) & (ys <= ws.depth - hd + GEOM_EPS)
    bad = (ws.height_map != level) | ws.impassable
    integral = np.pad(bad.astype(np.int64), ((1, 0), (1, 0))).cumsum(axis=0).cumsum(axis=1)
    x0 = np.clip(np.floor(xs - hw + GEOM_EPS).astype(np.int64), 0, ws.width)
    x1 = np.clip(np.ceil(xs + hw - GEOM_EPS).astype(np.int64), 0, ws.width)
    y0 = np.clip(np.floor(ys - hd + GEOM_EPS).astype(np.int64), 0, ws.depth)
    y1 = np.clip(np.ceil(ys + hd - GEOM_EPS).astype(np.int64), 0, ws.depth)
    bad_count = (integral[np.ix_(x1, y1)] - integral[np.ix_(x0, y1)]
                 - integral[np.ix_(x1, y0)] + integral[np.ix_(x0, y0)])
    mask = okx[:, None] & oky[None, :] & (bad_count == 0)
    for o in state.objects:
        if o.id == mover.id or o.level != level:
            continue
        r = o.rect()
        bx0 = max(int(np.floor(r[0] - hw + GEOM_EPS)) + 1, 0)
        bx1 = max(int(np.ceil(r[2] + hw - GEOM_EPS)), 0)
        by0 = max(int(np.floor(r[1] - hd + GEOM_EPS)) + 1, 0)
        by1 = max(int(np.ceil(r[3] + hd - GEOM_EPS)), 0)
        mask[bx0:bx1, by0:by1] = False
    return mask


_DIRS = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
         (1, 1, np.sqrt(2)), (1, -1, np.sqrt(2)), (-1, 1, np.sqrt(2)), (-1, -1, np.sqrt(2)))


def find_push_route(state, object_id, target_pose):
    """Waypoint list (current .. target) for a constant-level push.

    Tries the direct segment first, then an exact two-segment search over
    the integer lattice (one bend), and finally lattice A* with
    string-pulling for longer detours. Returns None when no constant-level
    route exists. Routes of one or two segments are segment-minimal.
    """
    mover = state.obj(object_id)
    tgt = (float(target_pose[0]), float(target_pose[1]))
    if not cells_support(state.workspace, mover.rect(tgt), mover.level):
        return None
    lo, hi = _inflated_obstacles(state, mover, mover.level)
    if _segment_clear(state, mover, mover.level, mover.pose, tgt, lo, hi):
        return (mover.pose, tgt)

    mask = _feasible_lattice(state, mover, mover.level)

    # one-bend routes: lattice midpoints visible from both endpoints
    mids = np.argwhere(mask).astype(np.float64)
    if len(mids):
        vis = (_batch_visible(mover.pose, mids, lo, hi)
               & _batch_visible(tgt, mids, lo, hi))
        if np.any(vis):
            cand = mids[vis]
            length = (np.hypot(cand[:, 0] - mover.pose[0], cand[:, 1] - mover.pose[1])
                      + np.hypot(cand[:, 0] - tgt[0], cand[:, 1] - tgt[1]))
            order = np.lexsort((cand[:, 1], cand[:, 0], np.round(length, 9)))
            best = cand[order[0]]
            return (mover.pose, (float(best[0]), float(best[1])), tgt)
    start = (int(round(mover.pose[0])), int(round(mover.pose[1])))
    goal = (int(round(tgt[0])), int(round(tgt[1])))
    W, D = mask.shape

    def lattice_ok(p):
        return 0 <= p[0] < W and 0 <= p[1] < D and mask[p[0], p[1]]

    def hookup(p_float, p_lat):
        # exact pose to/from its lattice anchor must itself be a clear slide
        return (p_float == (float(p_lat[0]), float(p_lat[1])) or
                _segment_clear(state, mover, mover.level, p_float,
                               (float(p_lat[0]), float(p_lat[1])), lo, hi))

    if not (lattice_ok(start) and lattice_ok(goal)):
        return None
    if not (hookup(mover.pose, start) and hookup(tgt, goal)):
        return None

    # A* over the lattice, octile heuristic
    def h(p):
        dx, dy = abs(p[0] - goal[0]), abs(p[1] - goal[1])
        return max(dx, dy) + (np.sqrt(2) - 1) * min(dx, dy)

    open_heap = [(h(start), 0.0, start)]
    g_cost = {start: 0.0}
    came = {}
    closed = set()
    found = False
    while open_heap:
        _, g, node = heapq.heappop(open_heap)
        if node in closed:
            continue
        closed.add(node)
        if node == goal:
            found = True
            break
        for dx, dy, step in _DIRS:
            nxt = (node[0] + dx, node[1] + dy)
            if not lattice_ok(nxt):
                continue
            if dx and dy:
                # no corner cutting between diagonal neighbors
                if not (lattice_ok((node[0] + dx, node[1])) and lattice_ok((node[0], node[1] + dy))):
                    continue
            ng = g + step
            if ng < g_cost.get(nxt, np.inf) - 1e-12:
                g_cost[nxt] = ng
                came[nxt] = node
                heapq.heappush(open_heap, (ng + h(nxt), ng, nxt))
    if not found:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(came[path[-1]])
    path.reverse()
    pts = [mover.pose] + [(float(x), float(y)) for x, y in path] + [tgt]

    # string-pull into maximal straight segments
    waypoints = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(state, mover, mover.level,
                                               pts[i], pts[j], lo, hi):
            j -= 1
        waypoints.append(pts[j])
        i = j
    return tuple(waypoints)


def apply_push(state, object_id, target_pose, target_level=None, jitter_rng=None):
    """Slide an object along straight segments at its current level.

    Returns (new_state, primitive). Cost is the number of straight
    segments. Optional jitter displaces the final pose by up to 0.5 cm
    when the displaced pose remains valid.
    """
    mover = state.obj(object_id)
    if target_level is not None and int(target_level) != mover.level:
        raise PushInfeasible(
            f"{object_id}: cannot push across levels ({mover.level} -> {target_level})")
    tgt = (float(target_pose[0]), float(target_pose[1]))
    if not cells_support(state.workspace, mover.rect(tgt), mover.level):
        raise PushInfeasible(
            f"{object_id}: target {tgt} not supported at level {mover.level}")
    if not placement_free(state, object_id, tgt, mover.level):
        raise TargetOccupied(f"{object_id}: push target {tgt} overlaps another object")
    route = find_push_route(state, object_id, tgt)
    if route is None:
        raise PushInfeasible(f"{object_id}: no constant-level route to {tgt}")
    final = tgt
    if jitter_rng is not None:
        jx, jy = jitter_rng.uniform(-0.5, 0.5, size=2)
        jittered = (tgt[0] + jx, tgt[1] + jy)
        from .world import placement_valid
        if placement_valid(state, object_id, jittered, mover.level):
            final = jittered
    new_state = state.with_object_at(object_id, final)
    cost = (len(route) - 1) * PUSH_COST
    return new_state, Primitive(PUSH, object_id, final, mover.level, cost, route)


def apply_pick_place(state, object_id, target_pose, target_level=None):
    """Grasp, move, and set down; cost 3. May change the object's level."""
    mover = state.obj(object_id)
    if not is_graspable(mover, state.workspace):
        raise NotGraspable(
            f"{object_id}: footprint {mover.footprint_w}x{mover.footprint_d} exceeds "
            f"gripper opening {state.workspace.gripper_opening}")
    level = mover.level if target_level is None else int(target_level)
    tgt = (float(target_pose[0]), float(target_pose[1]))
    if not placement_free(state, object_id, tgt, level):
        raise TargetOccupied(f"{object_id}: place target {tgt} overlaps another object")
    if not cells_support(state.workspace, mover.rect(tgt), level):
        raise TargetOccupied(
            f"{object_id}: place target {tgt} unsupported at level {level}")
    new_state = state.with_object_at(object_id, tgt, level)
    return new_state, Primitive(PICK_PLACE, object_id, tgt, level, PICK_PLACE_COST)


def is_success(state):
    """All objects within the success radius of their goals, levels equal."""
    return all(state.object_done(o.id) for o in state.objects)
