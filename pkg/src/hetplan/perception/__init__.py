from .descriptors import DESCRIPTOR_DIM, EMBEDDING_DIM, node_embedding, shape_descriptor
from .encoder import CODE_DIM, VoxelShapeEncoder
from .matching import Correspondence, match_objects
from .pipeline import observations_to_graph, region_embedding, view_embedding
from .voxel import RESOLUTION, voxelize
