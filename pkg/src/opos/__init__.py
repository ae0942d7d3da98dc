"""Only-pick-once multi-object grasp planning on synthetic bin layouts."""

from .cluster import EffectiveGrippingArea, effective_gripping_area
from .evaluation import RunConfig, compute_metrics, picks_needed, run_ablation, run_protocol, srnc_sweep
from .geometry import ConvexPolygon, OrientedRect, Point2, convex_hull, min_area_rect, rect_fits_in_rect
from .graph import build_graph, enumerate_cliques, neighbor_threshold
from .planner import PlanRequest, PlanResult, Planner, cascade_plan, execute, select_action
from .pose import PickPose, check_collision, sample_poses
from .predictor import CenterBandHeuristic, ClosingOracle, confusion_matrix, extract_gripping_area, get_predictor
from .scene import CATALOG, GRIPPERS, SceneLayout, generate_layout, get_shape, load_scene, save_scene

__version__ = "0.1.0"

__all__ = [
    "build_graph",
    "cascade_plan",
    "CATALOG",
    "CenterBandHeuristic",
    "check_collision",
    "ClosingOracle",
    "compute_metrics",
    "confusion_matrix",
    "convex_hull",
    "ConvexPolygon",
    "effective_gripping_area",
    "EffectiveGrippingArea",
    "enumerate_cliques",
    "execute",
    "extract_gripping_area",
    "generate_layout",
    "get_predictor",
    "get_shape",
    "GRIPPERS",
    "load_scene",
    "min_area_rect",
    "neighbor_threshold",
    "OrientedRect",
    "PickPose",
    "picks_needed",
    "Planner",
    "PlanRequest",
    "PlanResult",
    "Point2",
    "rect_fits_in_rect",
    "run_ablation",
    "run_protocol",
    "RunConfig",
    "sample_poses",
    "save_scene",
    "SceneLayout",
    "select_action",
    "srnc_sweep",
]
