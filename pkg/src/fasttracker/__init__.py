"""Online multi-object tracker with confidence-cascaded association,
coverage-based occlusion handling and scene-map motion constraints."""
from .association import AssociationResult, associate, solve_assignment
from .config import ConfigError, TrackerConfig, load_config
from .environment import EnvironmentMap, Region, load_map
from .geometry import Box, Quadrilateral, coverage, iou
from .metrics import EvalReport, evaluate
from .mot_io import Detection, GroundTruthBox, TrackRecord, parse_detections, parse_ground_truth, \
    parse_results, write_results
from .motion import ClassMotionProfile, KalmanState, NumericalError
from .postproc import gsp_smooth, link_tracklets, smooth_tracks
from .synth import ScenarioSpec, generate, scenario_suite
from .tracker import FastTracker, Tracklet, run_sequence

__version__ = "0.1.0"

__all__ = [
    "AssociationResult", "Box", "ClassMotionProfile", "ConfigError", "Detection", "EnvironmentMap",
    "EvalReport", "FastTracker", "GroundTruthBox", "KalmanState", "NumericalError", "Quadrilateral",
    "Region", "ScenarioSpec", "TrackRecord", "TrackerConfig", "Tracklet", "associate", "coverage",
    "evaluate", "generate", "gsp_smooth", "iou", "link_tracklets", "load_config", "load_map",
    "parse_detections", "parse_ground_truth", "parse_results", "run_sequence", "scenario_suite",
    "smooth_tracks", "solve_assignment", "write_results",
]
