from .world import (GEOM_EPS, PICK_PLACE_COST, PUSH_COST, SUCCESS_RADIUS_CM,
                    ObjectInstance, Region, SceneState, Workspace,
                    placement_free, placement_valid, rects_overlap)
from .primitives import (PICK_PLACE, PUSH, Primitive, apply_pick_place,
                         apply_push, direct_push_path_exists, find_push_route,
                         is_graspable, is_success)
from .observe import Observation, ObjectView, observe
from .scene_io import load_scene, save_scene, scene_from_dict, scene_to_dict
