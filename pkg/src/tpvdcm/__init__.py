"""Two-point visual driver control model with closed-loop lane-keeping simulation."""
from .controller import DriverParams, SteerCommand, new_controller, reset, step
from .perception import (
    CameraModel,
    CostMapGrid,
    ExtractionError,
    FeatureAngles,
    bearing_from_bbox,
    bounding_box_from_pose,
    costmap_angles,
    ground_truth_angles,
    project_world_point,
    render_cost_map,
)
from .sim import Metrics, ScenarioConfig, ScenarioFailure, TrajectoryLog, compute_metrics, run_scenario
from .track import Track, build_oval_track, inside_lane, nearest_centerline_point
from .vehicle import PidState, VehicleState, speed_pid_step, vehicle_step

__version__ = "0.1.0"
