from .bvh import Bvh, build_bvh, unsigned_distance
from .mesh import MeshError, TriangleMesh, icosphere, load_mesh, parse_obj, save_obj, unit_cube
from .octree import SurfaceOctree, build_surface_octree, octree_sample_positions
from .sampling import (
    AreaCdf,
    SdfSamples,
    build_area_cdf,
    fibonacci_directions,
    logistic_noise,
    sample_training_points,
    sign_by_stab_rays,
)
