"""World model: a height-mapped workspace on a 1 cm grid, axis-aligned
objects that translate between poses, and the scene value type.

Cells are unit squares; cell (i, j) spans [i, i+1] x [j, j+1] cm. Every cell
carries one height level (0 = table, k > 0 = raised surface) and may be
impassable (bin walls, pantry dividers). Object footprints are w x d
rectangles centered on the pose; an object rests on cells of its own level.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..exceptions import SceneError

GEOM_EPS = 1e-9
SUCCESS_RADIUS_CM = 3.0
PUSH_COST = 1
PICK_PLACE_COST = 3

SHAPE_KINDS = ("box", "cylinder")


@dataclass(frozen=True)
class Region:
    """A labeled constraint area: a shelf surface or an impassable wall."""

    name: str
    kind: str            # "shelf" | "wall"
    level: int
    passable: bool
    cells: tuple         # tuple of (x, y) cell indices

    def centroid(self):
        xs = np.array([c[0] for c in self.cells], dtype=np.float64) + 0.5
        ys = np.array([c[1] for c in self.cells], dtype=np.float64) + 0.5
        return float(xs.mean()), float(ys.mean())


@dataclass(frozen=True, eq=False)
class Workspace:
    width: int
    depth: int
    gripper_opening: float
    level_elevations: tuple = (0.0,)
    regions: tuple = ()
    height_map: np.ndarray = field(default=None, repr=False)
    impassable: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.gripper_opening <= 0:
            raise SceneError("gripper_opening must be positive")
        if self.height_map is None:
            hm = np.zeros((self.width, self.depth), dtype=np.int64)
            blocked = np.zeros((self.width, self.depth), dtype=bool)
            for region in self.regions:
                for (cx, cy) in region.cells:
                    if not (0 <= cx < self.width and 0 <= cy < self.depth):
                        raise SceneError(f"region {region.name!r} cell {(cx, cy)} outside grid")
                    if region.passable:
                        hm[cx, cy] = region.level
                    else:
                        blocked[cx, cy] = True
            object.__setattr__(self, "height_map", hm)
            object.__setattr__(self, "impassable", blocked)
        self.height_map.setflags(write=False)
        self.impassable.setflags(write=False)

    def elevation(self, level):
        return self.level_elevations[level]


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    shape: str           # "box" | "cylinder"
    footprint_w: float
    footprint_d: float
    height: float
    pose: tuple          # (x, y) center in cm
    level: int

    def __post_init__(self):
        if self.shape not in SHAPE_KINDS:
            raise SceneError(f"unknown shape kind {self.shape!r}")
        object.__setattr__(self, "footprint_w", float(self.footprint_w))
        object.__setattr__(self, "footprint_d", float(self.footprint_d))
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "pose", (float(self.pose[0]), float(self.pose[1])))
        object.__setattr__(self, "level", int(self.level))
        if min(self.footprint_w, self.footprint_d, self.height) <= 0:
            raise SceneError(f"object {self.id!r}: non-positive dimensions")

    def rect(self, pose=None):
        x, y = self.pose if pose is None else pose
        hw, hd = self.footprint_w / 2.0, self.footprint_d / 2.0
        return (x - hw, y - hd, x + hw, y + hd)

    def at(self, pose, level=None):
        return replace(self, pose=(float(pose[0]), float(pose[1])),
                       level=self.level if level is None else int(level))


def rects_overlap(a, b, eps=GEOM_EPS):
    """Strict interior overlap; touching edges do not collide."""
    return (min(a[2], b[2]) - max(a[0], b[0]) > eps and
            min(a[3], b[3]) - max(a[1], b[1]) > eps)


def covered_cells(rect, eps=GEOM_EPS):
    """Cells intersecting the rectangle's interior."""
    x0 = int(np.floor(rect[0] + eps))
    y0 = int(np.floor(rect[1] + eps))
    x1 = int(np.ceil(rect[2] - eps))
    y1 = int(np.ceil(rect[3] - eps))
    return x0, y0, x1, y1  # half-open cell ranges [x0, x1) x [y0, y1)


def cells_support(ws, rect, level, eps=GEOM_EPS):
    """True iff every cell under the rectangle is at `level` and passable."""
    x0, y0, x1, y1 = covered_cells(rect, eps)
    if x0 < 0 or y0 < 0 or x1 > ws.width or y1 > ws.depth:
        return False
    block = ws.height_map[x0:x1, y0:y1]
    if np.any(block != level):
        return False
    return not np.any(ws.impassable[x0:x1, y0:y1])


@dataclass(frozen=True, eq=False)
class SceneState:
    workspace: Workspace
    objects: tuple       # current ObjectInstance list
    goals: tuple         # same ids, goal poses
    success_radius: float = SUCCESS_RADIUS_CM

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        goal_ids = [g.id for g in self.goals]
        if sorted(ids) != sorted(goal_ids):
            raise SceneError(f"object ids {sorted(ids)} != goal ids {sorted(goal_ids)}")
        if len(set(ids)) != len(ids):
            raise SceneError("duplicate object ids")
        for group, label in ((self.objects, "object"), (self.goals, "goal")):
            for obj in group:
                if not cells_support(self.workspace, obj.rect(), obj.level):
                    raise SceneError(
                        f"{label} {obj.id!r} at {obj.pose} level {obj.level}: unsupported placement")
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    if a.level == b.level and rects_overlap(a.rect(), b.rect()):
                        raise SceneError(f"{label}s {a.id!r} and {b.id!r} overlap")

    @property
    def n_objects(self):
        return len(self.objects)

    def obj(self, object_id):
        for o in self.objects:
            if o.id == object_id:
                return o
        raise SceneError(f"unknown object id {object_id!r}")

    def goal_of(self, object_id):
        for g in self.goals:
            if g.id == object_id:
                return g
        raise SceneError(f"unknown goal id {object_id!r}")

    def others(self, object_id):
        return tuple(o for o in self.objects if o.id != object_id)

    def with_object_at(self, object_id, pose, level=None):
        moved = tuple(o.at(pose, level) if o.id == object_id else o for o in self.objects)
        return replace(self, objects=moved)

    def object_done(self, object_id, eps=1e-9):
        cur = self.obj(object_id)
        goal = self.goal_of(object_id)
        if cur.level != goal.level:
            return False
        dx = cur.pose[0] - goal.pose[0]
        dy = cur.pose[1] - goal.pose[1]
        return dx * dx + dy * dy <= self.success_radius ** 2 + eps


def placement_free(state, object_id, pose, level, ignore=()):
    """True iff the object's footprint at (pose, level) overlaps no other object."""
    mover = state.obj(object_id)
    rect = mover.rect(pose)
    skip = set(ignore) | {object_id}
    for other in state.objects:
        if other.id in skip or other.level != level:
            continue
        if rects_overlap(rect, other.rect()):
            return False
    return True


def placement_valid(state, object_id, pose, level, ignore=()):
    mover = state.obj(object_id)
    return (cells_support(state.workspace, mover.rect(pose), level)
            and placement_free(state, object_id, pose, level, ignore))
