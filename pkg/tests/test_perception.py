"""Voxelization, descriptors, matching, and the shape encoder."""

import warnings

import numpy as np
import pytest

from hetplan.exceptions import NotFittedError, SceneError
from hetplan.perception import (VoxelShapeEncoder, match_objects,
                                node_embedding, shape_descriptor, voxelize)
from hetplan.sim import ObjectInstance, SceneState, Workspace, observe

from helpers import brute_force_matching


def view_of(obj, ws=None):
    ws = ws or Workspace(width=40, depth=30, gripper_opening=8.0)
    st = SceneState(workspace=ws, objects=(obj,), goals=(obj,))
    return observe(st).views[0]


def box(oid, w, d, h, pose, level=0):
    return ObjectInstance(id=oid, shape="box", footprint_w=w, footprint_d=d,
                          height=h, pose=pose, level=level)


class TestVoxelize:
    def test_unit_cube_solid_centered(self):
        g = voxelize("box", 4, 4, 4)
        assert g.shape == (32, 32, 32)
        assert g.sum() == 32 ** 3  # cube fills the normalized volume

    def test_pose_invariance(self):
        a = view_of(box("a", 5, 3, 7, (10, 10)))
        b = view_of(box("a", 5, 3, 7, (25, 20)))
        assert a.grid.tobytes() == b.grid.tobytes()

    def test_scale_normalization_collapses_size(self):
        # documented behavior: size lives in the descriptor, not the grid
        small = voxelize("box", 4, 4, 4)
        large = voxelize("box", 12, 12, 12)
        assert small.tobytes() == large.tobytes()

    def test_cylinder_thinner_than_box(self):
        cyl = voxelize("cylinder", 6, 6, 6)
        cube = voxelize("box", 6, 6, 6)
        assert 0 < cyl.sum() < cube.sum()

    def test_rejects_degenerate(self):
        with pytest.raises(SceneError):
            voxelize("box", 0, 4, 4)

    def test_nonempty_guaranteed(self):
        assert voxelize("box", 1, 16, 1).sum() > 0


class TestDescriptor:
    def test_deterministic(self):
        v = view_of(box("a", 5, 4, 6, (10, 10)))
        d1 = shape_descriptor(v)
        d2 = shape_descriptor(v)
        assert d1.tobytes() == d2.tobytes()
        assert len(d1) == 10

    def test_size_distinguishes_identical_grids(self):
        small = shape_descriptor(view_of(box("a", 4, 4, 4, (10, 10))))
        large = shape_descriptor(view_of(box("a", 12, 12, 12, (16, 15))))
        assert np.linalg.norm(small - large) > 1.0

    def test_translation_invariant(self):
        a = shape_descriptor(view_of(box("a", 5, 3, 7, (10, 10))))
        b = shape_descriptor(view_of(box("a", 5, 3, 7, (25, 20))))
        np.testing.assert_array_equal(a, b)

    def test_noise_option(self):
        v = view_of(box("a", 5, 4, 6, (10, 10)))
        noisy = shape_descriptor(v, rng=np.random.default_rng(0), noise_sigma=0.05)
        assert not np.array_equal(noisy, shape_descriptor(v))


class TestNodeEmbedding:
    def test_zero_code_keeps_location(self):
        e = node_embedding(np.zeros(12), (1, 2, 3))
        np.testing.assert_array_equal(e, [0] * 12 + [1, 2, 3])

    def test_length_15(self):
        e = node_embedding(np.arange(12), (4, 5, 6))
        assert e.shape == (15,)

    def test_location_only_difference(self):
        code = np.arange(12.0)
        a = node_embedding(code, (1, 2, 3))
        b = node_embedding(code, (7, 8, 9))
        assert np.array_equal(a[:12], b[:12]) and not np.array_equal(a[12:], b[12:])

    def test_wrong_dims_rejected(self):
        with pytest.raises(ValueError):
            node_embedding(np.zeros(11), (1, 2, 3))


class TestMatching:
    def test_identity(self):
        desc = np.eye(4, 10)
        corr = match_objects(desc, desc)
        assert corr.pairs == tuple((i, i) for i in range(4))

    def test_swapped(self):
        cur = np.eye(2, 10)
        goal = cur[::-1]
        corr = match_objects(cur, goal)
        assert corr.pairs == ((0, 1), (1, 0))

    def test_unequal_counts_rejected(self):
        with pytest.raises(ValueError):
            match_objects(np.zeros((2, 10)), np.zeros((3, 10)))

    def test_matches_brute_force_under_noise(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(2, 5))
            goal = rng.standard_normal((n, 10))
            perm = rng.permutation(n)
            cur = goal[perm] + rng.normal(0, 0.01, (n, 10))
            got = match_objects(cur, goal)
            want = brute_force_matching(cur, goal)
            assert got.pairs == want

    def test_bijection_many_random(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            corr = match_objects(rng.standard_normal((n, 10)),
                                 rng.standard_normal((n, 10)))
            assert sorted(c for _, c in corr.pairs) == list(range(n))


class TestEncoder:
    def test_unfitted_rejected(self):
        enc = VoxelShapeEncoder()
        with pytest.raises(NotFittedError):
            enc.transform([voxelize("box", 4, 4, 4)])

    def test_random_weights_flagged(self):
        enc = VoxelShapeEncoder(allow_random=True, seed=3)
        with pytest.warns(UserWarning):
            code = enc.encode_one(voxelize("box", 4, 4, 4))
        assert code.shape == (12,)
        assert enc.fitted_ == "random"

    def test_identical_grids_identical_codes(self):
        enc = VoxelShapeEncoder(allow_random=True, seed=3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = enc.encode_one(voxelize("box", 5, 3, 7))
            b = enc.encode_one(voxelize("box", 5, 3, 7))
        assert a.tobytes() == b.tobytes()

    def test_disjoint_shapes_separate_more_than_jitter(self):
        enc = VoxelShapeEncoder(allow_random=True, seed=3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cube = enc.encode_one(voxelize("box", 6, 6, 6))
            plate = enc.encode_one(voxelize("box", 14, 14, 1))
            # intra-shape spread under mild size jitter of the same family
            cubes = [enc.encode_one(voxelize("box", w, w, w)) for w in (5, 6, 7)]
        intra = np.mean([np.linalg.norm(a - b) for a in cubes for b in cubes])
        assert np.linalg.norm(cube - plate) > intra

    def test_get_set_params(self):
        enc = VoxelShapeEncoder(epochs=3, seed=9)
        params = enc.get_params()
        assert params["epochs"] == 3 and params["seed"] == 9
        enc.set_params(epochs=5)
        assert enc.epochs == 5
        with pytest.raises(ValueError):
            enc.set_params(bogus=1)
