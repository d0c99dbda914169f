"""Content- and contention-aware selection of approximation branches for
multi-exit video classifiers, with a trace-driven simulator."""

from .branches import (AccuracyProfile, ApproxBranch, BranchCatalog, LatencyProfile, ProfileSet,
                       SwitchCostMatrix, TradeoffPoint, enumerate_branches, load_profiles,
                       outport_feature_side, pareto_frontier, store_profiles)
from .executor import (ContentionTrace, ExternalExecutor, InferenceResult, SimExecutorConfig,
                       SimFixture, SimulatedExecutor, contention_at, simulate_inference)
from .fce import (CategoryBoundaries, ScdConfig, categorize, detect_scene_change,
                  learn_boundaries, mean_edge_value, scharr_edge_map)
from .frameio import (Frame, GrayFrame, extract_channel, load_frame, load_trace, resize_nearest,
                      store_frame, to_grayscale)
from .pipeline import PipelineConfig, run_stream
from .rce import LatencyWindow, estimate_contention
from .scheduler import (Scheduler, SchedulerState, UserRequirement, runtime_frontier,
                        select_branch, update_stability)

__version__ = "0.1.0"

__all__ = [
    "AccuracyProfile",
    "ApproxBranch",
    "BranchCatalog",
    "LatencyProfile",
    "ProfileSet",
    "SwitchCostMatrix",
    "TradeoffPoint",
    "enumerate_branches",
    "load_profiles",
    "outport_feature_side",
    "pareto_frontier",
    "store_profiles",
    "ContentionTrace",
    "ExternalExecutor",
    "InferenceResult",
    "SimExecutorConfig",
    "SimFixture",
    "SimulatedExecutor",
    "contention_at",
    "simulate_inference",
    "CategoryBoundaries",
    "ScdConfig",
    "categorize",
    "detect_scene_change",
    "learn_boundaries",
    "mean_edge_value",
    "scharr_edge_map",
    "Frame",
    "GrayFrame",
    "extract_channel",
    "load_frame",
    "load_trace",
    "resize_nearest",
    "store_frame",
    "to_grayscale",
    "PipelineConfig",
    "run_stream",
    "LatencyWindow",
    "estimate_contention",
    "Scheduler",
    "SchedulerState",
    "UserRequirement",
    "runtime_frontier",
    "select_branch",
    "update_stability",
]
