"""Versioned scene file format. Saving is canonical (sorted keys, fixed
separators, trailing newline) so load -> save round-trips byte-identically.
"""

import json

import numpy as np

from ..exceptions import SceneError
from .world import ObjectInstance, Region, SceneState, Workspace

SCENE_SCHEMA = "hetplan.scene/1"


def canonical_json_bytes(obj):
    return (json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1) + "\n").encode("utf-8")


def _object_to_dict(obj):
    return {
        "id": obj.id,
        "shape": obj.shape,
        "footprint_w": obj.footprint_w,
        "footprint_d": obj.footprint_d,
        "height": obj.height,
        "pose": [obj.pose[0], obj.pose[1]],
        "level": obj.level,
    }


def _object_from_dict(d):
    return ObjectInstance(
        id=d["id"], shape=d["shape"],
        footprint_w=float(d["footprint_w"]), footprint_d=float(d["footprint_d"]),
        height=float(d["height"]), pose=(float(d["pose"][0]), float(d["pose"][1])),
        level=int(d["level"]))


def workspace_to_dict(ws):
    return {
        "width": ws.width,
        "depth": ws.depth,
        "cell_cm": 1.0,
        "gripper_opening_cm": ws.gripper_opening,
        "level_elevations_cm": list(ws.level_elevations),
        "height_map": [int(v) for v in ws.height_map.reshape(-1)],
        "regions": [
            {
                "name": r.name,
                "kind": r.kind,
                "level": r.level,
                "passable": r.passable,
                "cells": [[int(c[0]), int(c[1])] for c in r.cells],
            }
            for r in ws.regions
        ],
    }


def workspace_from_dict(d):
    regions = tuple(
        Region(name=r["name"], kind=r["kind"], level=int(r["level"]),
               passable=bool(r["passable"]),
               cells=tuple((int(c[0]), int(c[1])) for c in r["cells"]))
        for r in d["regions"])
    ws = Workspace(
        width=int(d["width"]), depth=int(d["depth"]),
        gripper_opening=float(d["gripper_opening_cm"]),
        level_elevations=tuple(float(e) for e in d["level_elevations_cm"]),
        regions=regions)
    stored = np.asarray(d["height_map"], dtype=np.int64)
    if stored.size != ws.width * ws.depth:
        raise SceneError("height_map length does not match width x depth")
    if not np.array_equal(stored.reshape(ws.width, ws.depth), ws.height_map):
        raise SceneError("height_map inconsistent with regions")
    return ws


def scene_to_dict(state):
    return {
        "schema": SCENE_SCHEMA,
        "workspace": workspace_to_dict(state.workspace),
        "objects": [_object_to_dict(o) for o in state.objects],
        "goals": [_object_to_dict(g) for g in state.goals],
        "success_radius_cm": state.success_radius,
    }


def scene_from_dict(d):
    if d.get("schema") != SCENE_SCHEMA:
        raise SceneError(f"unsupported scene schema {d.get('schema')!r}")
    ws = workspace_from_dict(d["workspace"])
    objects = tuple(_object_from_dict(o) for o in d["objects"])
    goals = tuple(_object_from_dict(g) for g in d["goals"])
    return SceneState(workspace=ws, objects=objects, goals=goals,
                      success_radius=float(d["success_radius_cm"]))


def save_scene(path, state):
    with open(path, "wb") as fh:
        fh.write(canonical_json_bytes(scene_to_dict(state)))


def load_scene(path):
    with open(path, "rb") as fh:
        return scene_from_dict(json.load(fh))
