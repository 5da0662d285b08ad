"""Fully-observed oracle planner.

Labels every object's preferred primitive from the start configuration
(push if ungraspable or a direct push path exists, else pick-place; push
costs 1 as a direct slide, everything else is estimated at 3), then finds
a minimum-total-cost move sequence with A* over per-object status
(at-start / at-buffer / at-goal). An object may move to its goal only when
the goal footprint is free and the primitive is feasible in the current
arrangement; objects sitting on someone's pending goal may be relocated
once to the nearest free buffer cell. Ties between equal-cost plans break
lexicographically on (object index, move kind), so labels are
deterministic and reproducible.
"""

import heapq
import itertools
import json
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidTask, PlannerExhausted
from .sim.primitives import (PICK_PLACE, PUSH, apply_pick_place, apply_push,
                             direct_push_path_exists, find_push_route,
                             is_graspable, is_success)
from .sim.world import cells_support, rects_overlap

BUFFER_MOVE = "BUFFER_MOVE"
GOAL_MOVE_RANK = 0
BUFFER_MOVE_RANK = 1
MAX_BUFFER_CANDIDATES = 400


@dataclass(frozen=True)
class PlanStep:
    object_id: str
    action: str          # PUSH | PICK_PLACE | BUFFER_MOVE
    primitive: str       # PUSH | PICK_PLACE (what the robot executes)
    target_pose: tuple
    target_level: int
    planned_cost: int


@dataclass(frozen=True)
class ExpertPlan:
    steps: tuple
    total_cost: int
    action_labels: dict   # object id -> 1 (push) / 0 (pick-place)
    first_labels: dict    # object id -> 1 iff first in the sequence
    solved_at_start: bool = False


def _without_goal_blockers(state, object_id):
    """Copy of the state with objects sitting on this object's goal removed.

    The sequencing rule forces goal blockers to move before the object
    does, so the label's direct-path test must not count them as corridor
    obstacles; everything else (other objects, walls, height steps) blocks
    normally.
    """
    goal = state.goal_of(object_id)
    rect = goal.rect()
    keep = tuple(
        o for o in state.objects
        if o.id == object_id or o.level != goal.level
        or not rects_overlap(rect, o.rect()))
    if len(keep) == len(state.objects):
        return state
    kept_ids = {o.id for o in keep}
    return replace(state, objects=keep,
                   goals=tuple(g for g in state.goals if g.id in kept_ids))


def action_label(state, object_id):
    """(push_label, planned_cost, primitive) for one object.

    push_label is 1 when the object is ungraspable or a direct push path to
    its goal exists; planned cost is 1 for a direct push and 3 otherwise.
    The direct-path test ignores objects currently occupying the goal
    footprint (they necessarily move first).
    """
    obj = state.obj(object_id)
    goal = state.goal_of(object_id)
    graspable = is_graspable(obj, state.workspace)
    same_level = obj.level == goal.level
    direct = same_level and direct_push_path_exists(
        _without_goal_blockers(state, object_id), object_id, goal.pose)
    if not graspable and not same_level:
        raise InvalidTask(
            f"{object_id}: ungraspable object must change level "
            f"({obj.level} -> {goal.level})")
    push_label = 1 if (not graspable or direct) else 0
    if direct:
        return push_label, 1, PUSH
    if graspable and push_label == 0:
        return push_label, 3, PICK_PLACE
    # ungraspable without a direct path: multiple pushes, estimated flat.
    # The workspace geometry alone must admit some route, else no primitive
    # sequence can ever move this object (an invalid task).
    empty = replace(state, objects=(obj,), goals=(goal,))
    if find_push_route(empty, object_id, goal.pose) is None:
        raise InvalidTask(
            f"{object_id}: ungraspable object has no constant-level route "
            f"through the workspace geometry")
    return push_label, 3, PUSH


def _arranged(state, ids, positions):
    objs = []
    by_id = {o.id: o for o in state.objects}
    for oid, (x, y, lvl) in zip(ids, positions):
        objs.append(replace(by_id[oid], pose=(x, y), level=lvl))
    return replace(state, objects=tuple(objs))


def _goal_rect(state, oid):
    goal = state.goal_of(oid)
    return goal.rect(), goal.level


def _goal_free(state, arranged, idx, ids, statuses):
    """No other object's current footprint overlaps this object's goal."""
    oid = ids[idx]
    rect, level = _goal_rect(state, oid)
    for j, other_id in enumerate(ids):
        if j == idx:
            continue
        other = arranged.obj(other_id)
        if other.level == level and rects_overlap(rect, other.rect()):
            return False
    return True


def _goal_move_feasible(arranged, oid, goal, primitive):
    if primitive == PICK_PLACE:
        return cells_support(arranged.workspace, goal.rect(), goal.level)
    if arranged.obj(oid).level != goal.level:
        return False
    return find_push_route(arranged, oid, goal.pose) is not None


def buffer_target(arranged, state, oid, pending_goal_rects):
    """Deterministic nearest free buffer cell for a blocking object.

    Scans integer-cm positions by distance (ties by x then y) for one that
    supports the footprint, overlaps no object and no pending goal, and is
    reachable: a direct push costs 1, otherwise pick-place (or a routed
    push for ungraspable objects) costs 3. Returns (pose, cost, primitive)
    or None.
    """
    mover = arranged.obj(oid)
    own_goal = state.goal_of(oid)
    ws = arranged.workspace
    graspable = is_graspable(mover, ws)
    hw = int(np.ceil(mover.footprint_w / 2.0))
    hd = int(np.ceil(mover.footprint_d / 2.0))
    xs = np.arange(hw, ws.width - hw + 1)
    ys = np.arange(hd, ws.depth - hd + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    cand = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1).astype(np.float64)
    d2 = (cand[:, 0] - mover.pose[0]) ** 2 + (cand[:, 1] - mover.pose[1]) ** 2
    order = np.lexsort((cand[:, 1], cand[:, 0], d2))
    scanned = 0
    for k in order:
        if scanned >= MAX_BUFFER_CANDIDATES:
            break
        pose = (float(cand[k, 0]), float(cand[k, 1]))
        if pose == mover.pose:
            continue
        scanned += 1
        if mover.level == own_goal.level:
            gdx = pose[0] - own_goal.pose[0]
            gdy = pose[1] - own_goal.pose[1]
            if gdx * gdx + gdy * gdy <= state.success_radius ** 2 + 1e-9:
                continue  # buffers stay out of the mover's own success disk
        rect = mover.rect(pose)
        if not cells_support(ws, rect, mover.level):
            continue
        if any(rects_overlap(rect, r) for (r, lvl) in pending_goal_rects
               if lvl == mover.level):
            continue
        clash = False
        for other in arranged.objects:
            if other.id != oid and other.level == mover.level \
                    and rects_overlap(rect, other.rect()):
                clash = True
                break
        if clash:
            continue
        if direct_push_path_exists(arranged, oid, pose):
            return pose, 1, PUSH
        if graspable:
            return pose, 3, PICK_PLACE
        if find_push_route(arranged, oid, pose) is not None:
            return pose, 3, PUSH
    return None


def _done(state, oid, pos):
    goal = state.goal_of(oid)
    if pos[2] != goal.level:
        return False
    dx, dy = pos[0] - goal.pose[0], pos[1] - goal.pose[1]
    return dx * dx + dy * dy <= state.success_radius ** 2 + 1e-9


def _expand(state, ids, labels, statuses, positions):
    """All legal moves from a search state, in deterministic order.

    Doneness is positional (within the success radius at the right level),
    so an already-satisfied object that sits on someone's pending goal can
    still move: to its exact goal pose (goal footprints never overlap, so
    this always clears the blockage) or once to a buffer cell.
    """
    arranged = _arranged(state, ids, positions)
    done = [_done(state, oid, pos) for oid, pos in zip(ids, positions)]
    pending_goal_rects = [_goal_rect(state, ids[j])
                          for j in range(len(ids)) if not done[j]]
    moves = []
    for i, oid in enumerate(ids):
        mover = arranged.obj(oid)
        blocks = any(
            lvl == mover.level and rects_overlap(mover.rect(), r)
            for (r, lvl), j in zip(pending_goal_rects,
                                   [j for j in range(len(ids)) if not done[j]])
            if j != i)
        goal = state.goal_of(oid)
        at_exact_goal = (positions[i] == (goal.pose[0], goal.pose[1], goal.level))
        if (not done[i] or blocks) and not at_exact_goal:
            push_label, cost, primitive = labels[oid]
            if _goal_free(state, arranged, i, ids, statuses) and \
                    _goal_move_feasible(arranged, oid, goal, primitive):
                step = PlanStep(object_id=oid,
                                action=PUSH if push_label else PICK_PLACE,
                                primitive=primitive, target_pose=goal.pose,
                                target_level=goal.level, planned_cost=cost)
                moves.append(((i, GOAL_MOVE_RANK), step, i, 2,
                              (goal.pose[0], goal.pose[1], goal.level)))
        if statuses[i] == 0 and blocks:
            found = buffer_target(arranged, state, oid, pending_goal_rects)
            if found is not None:
                pose, cost_b, primitive_b = found
                step = PlanStep(object_id=oid, action=BUFFER_MOVE,
                                primitive=primitive_b, target_pose=pose,
                                target_level=mover.level, planned_cost=cost_b)
                moves.append(((i, BUFFER_MOVE_RANK), step, i, 1,
                              (pose[0], pose[1], mover.level)))
    return moves


def astar_plan(state, node_budget=1_000_000):
    """Minimum-cost rearrangement sequence with deterministic tie-breaking.

    The admissible heuristic is the sum of pending objects' label costs;
    ties between equal-cost plans resolve to the lexicographically smallest
    (object index, move kind) sequence.
    """
    ids = [o.id for o in state.objects]
    labels = {oid: action_label(state, oid) for oid in ids}
    statuses0 = tuple(0 for _ in ids)   # 0: never buffered, 1: buffered, 2: at exact goal
    positions0 = tuple((o.pose[0], o.pose[1], o.level) for o in state.objects)
    action_labels = {oid: labels[oid][0] for oid in ids}

    def solved(positions):
        return all(_done(state, oid, pos) for oid, pos in zip(ids, positions))

    if solved(positions0):
        return ExpertPlan(steps=(), total_cost=0, action_labels=action_labels,
                          first_labels={oid: 0 for oid in ids}, solved_at_start=True)

    def h(positions):
        return sum(labels[oid][1] for oid, pos in zip(ids, positions)
                   if not _done(state, oid, pos))

    counter = itertools.count()
    heap = [(h(positions0), (), next(counter), 0, statuses0, positions0, ())]
    closed = {}
    expansions = 0
    while heap:
        f, order_key, _, g, statuses, positions, steps = heapq.heappop(heap)
        key = (statuses, positions)
        if closed.get(key, np.inf) <= g:
            continue
        closed[key] = g
        if solved(positions):
            first = steps[0].object_id
            return ExpertPlan(
                steps=steps, total_cost=g, action_labels=action_labels,
                first_labels={oid: int(oid == first) for oid in ids})
        expansions += 1
        if expansions > node_budget:
            raise PlannerExhausted(f"no plan within {node_budget} expansions")
        for move_key, step, i, new_status, new_pos in _expand(
                state, ids, labels, statuses, positions):
            ns = list(statuses)
            ns[i] = new_status
            np_ = list(positions)
            np_[i] = new_pos
            ns, np_ = tuple(ns), tuple(np_)
            ng = g + step.planned_cost
            nkey = (ns, np_)
            if closed.get(nkey, np.inf) <= ng:
                continue
            heapq.heappush(heap, (ng + h(np_), order_key + (move_key,),
                                  next(counter), ng, ns, np_, steps + (step,)))
    raise PlannerExhausted("search space exhausted without a plan")


def first_object_label(plan):
    """Per-object 0/1 vector marking the first object in the sequence."""
    return dict(plan.first_labels)


def execute_plan(state, plan):
    """Replay a plan through the simulator; returns (final state, costs)."""
    costs = []
    for step in plan.steps:
        if step.primitive == PUSH:
            state, prim = apply_push(state, step.object_id, step.target_pose,
                                     target_level=step.target_level)
        else:
            state, prim = apply_pick_place(state, step.object_id, step.target_pose,
                                           target_level=step.target_level)
        costs.append(prim.cost)
    return state, costs


def plan_to_dict(plan):
    return {
        "schema": "hetplan.plan/1",
        "sequence": [
            {
                "object_id": s.object_id,
                "action": s.action,
                "primitive": s.primitive,
                "target_pose": [s.target_pose[0], s.target_pose[1]],
                "target_level": s.target_level,
                "planned_cost": s.planned_cost,
            }
            for s in plan.steps
        ],
        "total_cost": plan.total_cost,
        "action_labels": dict(sorted(plan.action_labels.items())),
        "first_labels": dict(sorted(plan.first_labels.items())),
        "solved_at_start": plan.solved_at_start,
    }


def save_plan(path, plan):
    with open(path, "w") as fh:
        json.dump(plan_to_dict(plan), fh, sort_keys=True, indent=1)
        fh.write("\n")


__all__ = [
    "BUFFER_MOVE", "ExpertPlan", "PlanStep", "action_label", "astar_plan",
    "buffer_target", "execute_plan", "first_object_label", "is_success",
    "plan_to_dict", "save_plan",
]
