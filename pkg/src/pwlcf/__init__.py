"""Car following with min-max piecewise-linear laws and anticipation of several leaders."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .calibration import (
    SegmentationProblem,
    compute_samples,
    fit_min_max,
    grid_search,
    segment_regress,
    validate,
)
from .dynamics import (
    AnticipationConfig,
    DiscountMode,
    LeaderProfile,
    Open,
    Ring,
    Scenario,
    Trajectory,
    anticipated_spacing,
    simulate,
    step,
    summary_stats,
)
from .law import (
    AffineSegment,
    BehaviorLaw,
    check_stability_condition,
    evaluate,
    fitted_four_segment_law,
    inverse_spacing,
    read_law,
    six_segment_law,
    write_law,
)
from .stationary import open_stationary, ring_stationary, verify_fixed_point
from .trajectory_io import Dataset, load_trajectories, resample

__all__ = [
    "BACKEND",
    "AffineSegment",
    "AnticipationConfig",
    "BehaviorLaw",
    "Dataset",
    "DiscountMode",
    "LeaderProfile",
    "Open",
    "Ring",
    "Scenario",
    "SegmentationProblem",
    "Trajectory",
    "anticipated_spacing",
    "check_stability_condition",
    "compute_samples",
    "evaluate",
    "fit_min_max",
    "fitted_four_segment_law",
    "grid_search",
    "inverse_spacing",
    "load_trajectories",
    "open_stationary",
    "read_law",
    "resample",
    "ring_stationary",
    "segment_regress",
    "simulate",
    "six_segment_law",
    "step",
    "summary_stats",
    "validate",
    "verify_fixed_point",
    "write_law",
]
