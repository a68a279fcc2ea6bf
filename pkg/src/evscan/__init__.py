"""evscan: event-only 3D body scanning.

Simulate an event camera orbiting a static mesh, select contour events,
carve an attenuated-ray voxel volume, extract a surface, fit a parametric
skinned body by Chamfer-loss optimization, and evaluate with PEL-MPJPE and
Chamfer Distance.
"""

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    Event,
    EventStream,
    Ray,
    Trajectory,
    TriMesh,
    VoxelGrid,
    make_orbit,
    pixel_to_ray,
    project_point,
    world_to_voxel,
)
from .simulate import Scene, SimConfig, render_depth, render_log_intensity, simulate_events
from .contour import ContourProvider, filter_density, filter_gt, filter_probabilities
from .carve import AttenuationMode, CarveConfig, accumulate, attenuate, prune, traverse_ray
from .surface import marching_cubes, sample_surface
from .body import BodyModel, BodyParams, load_model, make_toy_model, save_model, skin
from .fit import FitConfig, FitResult, chamfer_loss, fit, loss_and_gradient
from .metrics import chamfer_distance, mpjpe, pel_align, pel_mpjpe

__version__ = "0.1.0"
