"""Simulator semantics: graspability, push corridors, primitive costs,
success predicate, observation, and the scene file round trip."""

import numpy as np
import pytest

from hetplan.exceptions import (NotGraspable, PushInfeasible, SceneError,
                                TargetOccupied)
from hetplan.sim import (ObjectInstance, Region, SceneState, Workspace,
                         apply_pick_place, apply_push,
                         direct_push_path_exists, find_push_route,
                         is_graspable, is_success, observe,
                         scene_from_dict, scene_to_dict)
from hetplan.sim.scene_io import canonical_json_bytes


def flat_workspace(width=40, depth=30, opening=8.0):
    return Workspace(width=width, depth=depth, gripper_opening=opening)


def shelf_workspace(width=40, depth=30, opening=8.0, shelf_from_x=30):
    cells = tuple((x, y) for x in range(shelf_from_x, width) for y in range(depth))
    shelf = Region("shelf", "shelf", level=1, passable=True, cells=cells)
    return Workspace(width=width, depth=depth, gripper_opening=opening,
                     level_elevations=(0.0, 12.0), regions=(shelf,))


def box(oid, w, d, h, pose, level=0):
    return ObjectInstance(id=oid, shape="box", footprint_w=w, footprint_d=d,
                          height=h, pose=pose, level=level)


def scene(ws, objects, goals=None):
    return SceneState(workspace=ws, objects=tuple(objects),
                      goals=tuple(goals if goals is not None else objects))


class TestGraspable:
    def test_oversized(self):
        ws = flat_workspace()
        assert not is_graspable(box("a", 12, 12, 6, (10, 10)), ws)

    def test_small(self):
        ws = flat_workspace()
        assert is_graspable(box("a", 4, 4, 4, (10, 10)), ws)

    def test_boundary_inclusive(self):
        ws = flat_workspace()
        assert is_graspable(box("a", 8, 20, 6, (10, 15)), ws)


class TestDirectPushPath:
    def test_empty_corridor(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        assert direct_push_path_exists(st, "a", (20, 10))

    def test_height_step_blocks(self):
        ws = shelf_workspace()
        st = scene(ws, [box("a", 4, 4, 4, (10, 10))])
        # target on the shelf band: crossing the table->shelf discontinuity
        assert not direct_push_path_exists(st, "a", (35, 10))

    def test_object_blocks_corridor(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (5, 15)),
                                      box("b", 4, 4, 4, (20, 15))])
        assert not direct_push_path_exists(st, "a", (35, 15))

    def test_unknown_object_rejected(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        with pytest.raises(SceneError):
            direct_push_path_exists(st, "zz", (20, 10))


class TestApplyPush:
    def test_straight_push(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        new, prim = apply_push(st, "a", (20, 10))
        assert new.obj("a").pose == (20.0, 10.0)
        assert prim.cost == 1

    def test_route_around_obstacle_costs_two(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (5, 15)),
                                      box("b", 4, 4, 4, (20, 15))])
        # oracle bounds: the direct segment is blocked, so >= 2 segments;
        # the returned route achieves the lower bound with clear segments
        assert not direct_push_path_exists(st, "a", (35, 15))
        route = find_push_route(st, "a", (35, 15))
        assert route is not None
        new, prim = apply_push(st, "a", (35, 15))
        assert prim.cost == len(route) - 1 == 2
        from hetplan.sim.primitives import _segment_clear
        for p0, p1 in zip(route, route[1:]):
            assert _segment_clear(st, st.obj("a"), 0, p0, p1)

    def test_cross_level_infeasible(self):
        ws = shelf_workspace()
        st = scene(ws, [box("a", 4, 4, 4, (10, 10))])
        with pytest.raises(PushInfeasible):
            apply_push(st, "a", (35, 10), target_level=1)
        with pytest.raises(PushInfeasible):
            apply_push(st, "a", (35, 10))  # target cells are shelf cells

    def test_occupied_target(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10)),
                                      box("b", 4, 4, 4, (20, 10))])
        with pytest.raises(TargetOccupied):
            apply_push(st, "a", (19, 10))

    def test_push_never_changes_level(self):
        ws = shelf_workspace()
        st = scene(ws, [box("a", 4, 4, 4, (34, 10), level=1)])
        new, _ = apply_push(st, "a", (36, 20))
        assert new.obj("a").level == 1

    def test_deterministic(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        a1, _ = apply_push(st, "a", (20, 10))
        a2, _ = apply_push(st, "a", (20, 10))
        assert a1.obj("a").pose == a2.obj("a").pose

    def test_jitter_mode_stays_valid(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10)),
                                      box("b", 4, 4, 4, (20, 10))])
        for seed in range(20):
            new, _ = apply_push(st, "a", (15.5, 10), jitter_rng=np.random.default_rng(seed))
            dx = abs(new.obj("a").pose[0] - 15.5)
            dy = abs(new.obj("a").pose[1] - 10)
            assert dx <= 0.5 and dy <= 0.5


class TestApplyPickPlace:
    def test_to_shelf(self):
        ws = shelf_workspace()
        st = scene(ws, [box("a", 4, 4, 4, (10, 10))])
        new, prim = apply_pick_place(st, "a", (35, 10), target_level=1)
        assert prim.cost == 3
        assert new.obj("a").level == 1

    def test_not_graspable(self):
        st = scene(flat_workspace(), [box("a", 12, 12, 6, (10, 10))])
        with pytest.raises(NotGraspable):
            apply_pick_place(st, "a", (30, 10))

    def test_occupied(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10)),
                                      box("b", 4, 4, 4, (20, 10))])
        with pytest.raises(TargetOccupied):
            apply_pick_place(st, "a", (21, 10))


class TestSuccess:
    def test_exact(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        assert is_success(st)

    def test_boundary_inclusive(self):
        goals = [box("a", 4, 4, 4, (10, 10))]
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (13, 10))], goals)
        assert is_success(st)
        st2 = scene(flat_workspace(), [box("a", 4, 4, 4, (13.5, 10))], goals)
        assert not is_success(st2)

    def test_level_must_match(self):
        ws = shelf_workspace()
        goals = [box("a", 4, 4, 4, (35, 10), level=1)]
        st = SceneState(workspace=ws, objects=(box("a", 4, 4, 4, (35, 10), level=1),),
                        goals=tuple(goals))
        assert is_success(st)
        # same (x, y) but still on the table: must not count
        on_table = box("a", 4, 4, 4, (25, 10), level=0)
        st2 = SceneState(workspace=ws, objects=(on_table,), goals=tuple(goals))
        assert not is_success(st2)


class TestObserve:
    def test_counts(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10)),
                                      box("b", 6, 4, 5, (25, 20))])
        obs = observe(st)
        assert len(obs.views) == 2
        assert all(v.grid.shape == (32, 32, 32) for v in obs.views)
        assert set(np.unique(obs.instance_map)) == {-1, 0, 1}

    def test_empty_scene(self):
        st = SceneState(workspace=flat_workspace(), objects=(), goals=())
        obs = observe(st)
        assert obs.views == ()

    def test_occlusion_drops_shadowed_voxels(self):
        # small object fully behind a taller, wider one along +x
        small = box("s", 3, 3, 3, (10, 15))
        tall = box("t", 6, 12, 10, (20, 15))
        st = scene(flat_workspace(), [small, tall])
        full = observe(st, occlusion=False)
        part = observe(st, occlusion=True)
        grid_full = full.views[0].grid
        grid_part = part.views[0].grid

        # ray-march oracle: sample along +x from each voxel center
        from hetplan.perception.voxel import voxel_centers
        ws = st.workspace
        lx, ly, lz = voxel_centers(3, 3, 3)
        wx, wy, wz = lx + 10, ly + 15, lz + ws.elevation(0) + 1.5
        r = tall.rect()
        z0, z1 = ws.elevation(0), ws.elevation(0) + tall.height
        shadowed = np.zeros_like(grid_full, dtype=bool)
        for idx in np.argwhere(grid_full > 0):
            i, j, k = idx
            for t in np.arange(0.25, ws.width, 0.25):
                px = wx[i, j, k] + t
                if (r[0] < px < r[2] and r[1] < wy[i, j, k] < r[3]
                        and z0 < wz[i, j, k] < z1):
                    shadowed[i, j, k] = True
                    break
        dropped = (grid_full > 0) & (grid_part == 0)
        assert shadowed.sum() > 0
        assert np.all(dropped[shadowed])  # loses at least the shadowed subset


class TestInvariantsRandom:
    def test_random_primitives_keep_invariants(self):
        """Smaller-scale version of the acceptance sweep (criterion 5 runs 10k)."""
        from helpers import random_primitive_sweep
        overlaps, cross_level, cost_errors = random_primitive_sweep(
            n_applications=1500, seed=0)
        assert overlaps == 0
        assert cross_level == 0
        assert cost_errors == 0


class TestSceneIO:
    def test_round_trip_byte_identical(self, tmp_path):
        ws = shelf_workspace()
        st = SceneState(
            workspace=ws,
            objects=(box("a", 4, 4, 4, (10, 10)), box("b", 12, 12, 8, (22, 20))),
            goals=(box("a", 4, 4, 4, (35, 12), level=1), box("b", 12, 12, 8, (10, 22))))
        d = scene_to_dict(st)
        raw1 = canonical_json_bytes(d)
        st2 = scene_from_dict(d)
        raw2 = canonical_json_bytes(scene_to_dict(st2))
        assert raw1 == raw2

    def test_rejects_bad_schema(self):
        with pytest.raises(SceneError):
            scene_from_dict({"schema": "other/9"})

    def test_rejects_inconsistent_height_map(self):
        st = scene(flat_workspace(), [box("a", 4, 4, 4, (10, 10))])
        d = scene_to_dict(st)
        d["workspace"]["height_map"][5] = 3
        with pytest.raises(SceneError):
            scene_from_dict(d)

    def test_overlapping_objects_rejected(self):
        with pytest.raises(SceneError):
            scene(flat_workspace(), [box("a", 6, 6, 4, (10, 10)),
                                     box("b", 6, 6, 4, (12, 10))])
