"""Shared test utilities: kink-safe sampling for finite differences,
random-scene generators, and independent reference implementations used
as oracles."""

import numpy as np

from hetplan.exceptions import (NotGraspable, PushInfeasible, SceneError,
                                TargetOccupied)
from hetplan.sim import (ObjectInstance, Region, SceneState, Workspace,
                         apply_pick_place, apply_push, rects_overlap)
from hetplan.sim.primitives import PICK_PLACE, PUSH


def away_from_kinks(x, margin=0.01, kinks=(0.0,)):
    """Push entries of x away from non-differentiable points.

    Central differences are only meaningful where the function is smooth in
    a step-sized neighborhood, so random inputs get nudged off the kinks.
    """
    out = np.array(x, dtype=np.float64)
    for k in kinks:
        near = np.abs(out - k) < margin
        out[near] = k + np.where(out[near] >= k, margin, -margin)
    return out


def pool_safe_input(rng, shape, window=2, gap=0.05):
    """Random array whose pooling windows have a clear unique maximum.

    Keeps the FD perturbation from flipping the argmax inside any window.
    """
    B, C, D, H, W = shape
    while True:
        x = rng.standard_normal(shape)
        v = x.reshape(B, C, D // window, window, H // window, window, W // window, window)
        flat = v.transpose(0, 1, 2, 4, 6, 3, 5, 7).reshape(-1, window ** 3)
        part = np.sort(flat, axis=1)
        if np.all(part[:, -1] - part[:, -2] > gap):
            return x


# ---------------------------------------------------------------------------
# reference implementations (independent oracles)

def reference_gat_layer(x, edges, theta, att, slope=0.2):
    """Plain homogeneous graph-attention layer, computed node by node.

    For each destination i: softmax over LeakyReLU(att . [theta x_i || theta x_j])
    for j in in-neighbors(i) and j = i, then the coefficient-weighted sum of
    projected features. Single shared weight matrix; no edge types.
    """
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    att = np.asarray(att, dtype=np.float64)
    d = theta.shape[0]
    h = x @ theta.T
    n = len(x)
    out = np.zeros((n, d))
    for i in range(n):
        cand = [s for (s, t) in edges if t == i] + [i]
        logits = np.array([att[:d] @ h[i] + att[d:] @ h[j] for j in cand])
        logits = np.where(logits > 0, logits, slope * logits)
        e = np.exp(logits - logits.max())
        alpha = e / e.sum()
        out[i] = sum(a * h[j] for a, j in zip(alpha, cand))
    return out


def union_edges(graph):
    """All typed edges of a task graph flattened to plain (src, dst) pairs."""
    pairs = []
    for arr in graph.edges.values():
        pairs.extend((int(s), int(d)) for s, d in arr)
    return pairs


def brute_force_matching(current_desc, goal_desc):
    """Exhaustive minimum-total-L2 assignment over all permutations."""
    import itertools
    cur = np.asarray(current_desc, dtype=np.float64)
    goal = np.asarray(goal_desc, dtype=np.float64)
    n = len(goal)
    best = None
    best_cost = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.linalg.norm(goal[g] - cur[perm[g]]) for g in range(n))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best = perm
    return tuple((g, best[g]) for g in range(n))


# ---------------------------------------------------------------------------
# exhaustive planning oracle (checks astar_plan optimality)

def _oracle_label(state, oid):
    """Independent re-derivation of the per-object action label and cost.

    Objects overlapping the goal footprint are dropped before the
    direct-path test (they are forced to move first by the sequencing
    rules), matching the labeling semantics.
    """
    from dataclasses import replace as _replace
    from hetplan.sim import direct_push_path_exists, is_graspable
    obj = state.obj(oid)
    goal = state.goal_of(oid)
    graspable = is_graspable(obj, state.workspace)
    keep = tuple(o for o in state.objects
                 if o.id == oid or o.level != goal.level
                 or not rects_overlap(goal.rect(), o.rect()))
    kept_ids = {o.id for o in keep}
    reduced = _replace(state, objects=keep,
                       goals=tuple(g for g in state.goals if g.id in kept_ids))
    direct = obj.level == goal.level and direct_push_path_exists(reduced, oid, goal.pose)
    push = 1 if (not graspable or direct) else 0
    if direct:
        return push, 1, "PUSH"
    if graspable and push == 0:
        return push, 3, "PICK_PLACE"
    return push, 3, "PUSH"


def enumerate_optimal_plan(state, depth_cap=None):
    """Branch-and-bound over full move sequences (goal moves plus buffer
    relocations of blocking objects).

    Independent of the A* search; shares only the world predicates and the
    deterministic buffer-cell rule, which are part of the planning
    semantics rather than the search. Returns (cost, first_object_id,
    order_key) of the best sequence under (cost, lexicographic order), or
    None when no sequence reaches the goal within the depth cap.
    """
    from dataclasses import replace as _replace
    from hetplan.expert import buffer_target
    from hetplan.sim import find_push_route, rects_overlap
    from hetplan.sim.world import cells_support

    ids = [o.id for o in state.objects]
    labels = {oid: _oracle_label(state, oid) for oid in ids}
    n = len(ids)
    depth_cap = depth_cap if depth_cap is not None else 2 * n
    goal_rect = {oid: (state.goal_of(oid).rect(), state.goal_of(oid).level)
                 for oid in ids}
    best = {"cost": np.inf, "order": None, "first": None}

    def arranged(positions):
        objs = tuple(_replace(state.obj(oid), pose=(p[0], p[1]), level=p[2])
                     for oid, p in zip(ids, positions))
        return _replace(state, objects=objs)

    def rec(statuses, positions, g, order):
        if all(s == 2 for s in statuses):
            cand = (g, order)
            if cand < (best["cost"], best["order"] if best["order"] is not None else ((np.inf,),)):
                best["cost"], best["order"] = g, order
                best["first"] = ids[order[0][0]]
            return
        if len(order) >= depth_cap or g >= best["cost"]:
            return
        arr = arranged(positions)
        pending = [i for i, s in enumerate(statuses) if s != 2]
        pend_rects = [goal_rect[ids[i]] for i in pending]
        for i in pending:
            oid = ids[i]
            push, cost, primitive = labels[oid]
            goal = state.goal_of(oid)
            rect, level = goal_rect[oid]
            free = all(
                not (arr.obj(ids[j]).level == level
                     and rects_overlap(rect, arr.obj(ids[j]).rect()))
                for j in range(n) if j != i)
            feasible = False
            if free:
                if primitive == "PICK_PLACE":
                    feasible = cells_support(arr.workspace, rect, level)
                else:
                    feasible = (arr.obj(oid).level == level
                                and find_push_route(arr, oid, goal.pose) is not None)
            if feasible:
                ns = statuses[:i] + (2,) + statuses[i + 1:]
                npos = positions[:i] + ((goal.pose[0], goal.pose[1], level),) + positions[i + 1:]
                rec(ns, npos, g + cost, order + ((i, 0),))
            if statuses[i] == 0:
                mover = arr.obj(oid)
                blocks = any(
                    lvl == mover.level and rects_overlap(mover.rect(), r)
                    for j, (r, lvl) in zip(pending, pend_rects) if j != i)
                if blocks:
                    found = buffer_target(arr, state, oid, pend_rects)
                    if found is not None:
                        pose, bcost, _bprim = found
                        ns = statuses[:i] + (1,) + statuses[i + 1:]
                        npos = positions[:i] + ((pose[0], pose[1], mover.level),) + positions[i + 1:]
                        rec(ns, npos, g + bcost, order + ((i, 1),))

    statuses0 = tuple(2 if state.object_done(oid) else 0 for oid in ids)
    positions0 = tuple((o.pose[0], o.pose[1], o.level) for o in state.objects)
    rec(statuses0, positions0, 0, ())
    if best["order"] is None:
        return None
    return best["cost"], best["first"], best["order"]


def random_task(rng, n_lo=2, n_hi=4, max_tries=50):
    """Random unsolved (start, goal) task on a sweep workspace."""
    from dataclasses import replace as _replace
    from hetplan.sim import SceneState
    from hetplan.sim.world import cells_support

    for _ in range(max_tries):
        base = random_scene(rng, n_lo, n_hi)
        ws = base.workspace
        goals = []
        ok = True
        for obj in base.objects:
            placed = None
            for _ in range(80):
                graspable = min(obj.footprint_w, obj.footprint_d) <= ws.gripper_opening
                if graspable:
                    level = int(rng.integers(0, len(ws.level_elevations)))
                else:
                    level = obj.level
                hw = int(np.ceil(obj.footprint_w / 2))
                hd = int(np.ceil(obj.footprint_d / 2))
                x = float(rng.integers(hw, ws.width - hw + 1))
                y = float(rng.integers(hd, ws.depth - hd + 1))
                cand = _replace(obj, pose=(x, y), level=level)
                if not cells_support(ws, cand.rect(), level):
                    continue
                if any(g.level == level and rects_overlap(g.rect(), cand.rect())
                       for g in goals):
                    continue
                placed = cand
                break
            if placed is None:
                ok = False
                break
            goals.append(placed)
        if not ok:
            continue
        state = SceneState(workspace=ws, objects=base.objects, goals=tuple(goals))
        if all(state.object_done(o.id) for o in state.objects):
            continue
        try:
            from hetplan.expert import action_label
            for o in state.objects:
                action_label(state, o.id)
        except Exception:
            continue
        return state
    raise RuntimeError("could not sample a task")


# ---------------------------------------------------------------------------
# random scenes and the primitive-invariant sweep

def _sweep_workspace(rng):
    kind = rng.integers(0, 3)
    if kind == 0:
        return Workspace(width=48, depth=32, gripper_opening=8.0)
    if kind == 1:
        cells = tuple((x, y) for x in range(36, 48) for y in range(32))
        shelf = Region("shelf", "shelf", level=1, passable=True, cells=cells)
        return Workspace(width=48, depth=32, gripper_opening=8.0,
                         level_elevations=(0.0, 12.0), regions=(shelf,))
    cells = tuple((24, y) for y in range(8, 24))
    wall = Region("wall", "wall", level=0, passable=False, cells=cells)
    return Workspace(width=48, depth=32, gripper_opening=8.0, regions=(wall,))


def _try_place(ws, placed, oid, w, d, h, rng, level_pool):
    for _ in range(60):
        level = int(rng.choice(level_pool))
        x = int(rng.integers(int(np.ceil(w / 2)), ws.width - int(np.ceil(w / 2)) + 1))
        y = int(rng.integers(int(np.ceil(d / 2)), ws.depth - int(np.ceil(d / 2)) + 1))
        cand = ObjectInstance(id=oid, shape="box" if rng.random() < 0.7 else "cylinder",
                              footprint_w=w, footprint_d=d if rng.random() < 0.7 else w,
                              height=h, pose=(float(x), float(y)), level=level)
        from hetplan.sim.world import cells_support
        if not cells_support(ws, cand.rect(), level):
            continue
        if any(o.level == level and rects_overlap(o.rect(), cand.rect()) for o in placed):
            continue
        return cand
    return None


def random_scene(rng, n_lo=2, n_hi=5):
    """Small random scene for property sweeps (objects double as goals)."""
    while True:
        ws = _sweep_workspace(rng)
        level_pool = list(range(len(ws.level_elevations)))
        n = int(rng.integers(n_lo, n_hi + 1))
        placed = []
        for i in range(n):
            if rng.random() < 0.3:
                w, d = int(rng.integers(10, 15)), int(rng.integers(10, 15))
                h = int(rng.integers(6, 12))
            else:
                w, d = int(rng.integers(3, 8)), int(rng.integers(3, 8))
                h = int(rng.integers(3, 8))
            obj = _try_place(ws, placed, f"o{i}", w, d, h, rng, level_pool)
            if obj is not None:
                placed.append(obj)
        if len(placed) >= n_lo:
            return SceneState(workspace=ws, objects=tuple(placed), goals=tuple(placed))


def random_primitive_sweep(n_applications, seed):
    """Apply random primitives; count invariant violations.

    Returns (footprint_overlaps, cross_level_pushes, cost_errors) observed
    over exactly n_applications successful primitive applications.
    """
    rng = np.random.default_rng(seed)
    overlaps = cross_level = cost_errors = 0
    state = random_scene(rng)
    applied = 0
    since_reset = 0
    while applied < n_applications:
        if since_reset >= 30:
            state = random_scene(rng)
            since_reset = 0
        obj = state.objects[rng.integers(0, len(state.objects))]
        tx = float(rng.integers(2, state.workspace.width - 1))
        ty = float(rng.integers(2, state.workspace.depth - 1))
        try:
            if rng.random() < 0.5:
                new_state, prim = apply_push(state, obj.id, (tx, ty))
            else:
                lvl = int(rng.integers(0, len(state.workspace.level_elevations)))
                new_state, prim = apply_pick_place(state, obj.id, (tx, ty), target_level=lvl)
        except (PushInfeasible, TargetOccupied, NotGraspable, SceneError):
            since_reset += 1
            continue
        applied += 1
        since_reset += 1
        objs = new_state.objects
        for i, a in enumerate(objs):
            for b in objs[i + 1:]:
                if a.level == b.level and rects_overlap(a.rect(), b.rect()):
                    overlaps += 1
        if prim.kind == PUSH:
            if new_state.obj(obj.id).level != obj.level:
                cross_level += 1
            if prim.cost != len(prim.waypoints) - 1:
                cost_errors += 1
        elif prim.cost != 3:
            cost_errors += 1
        state = new_state
    return overlaps, cross_level, cost_errors
