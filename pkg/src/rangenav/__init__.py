"""Inertial + single-range state estimation with greedy anchor selection."""

from .ekf import (
    CovarianceError,
    DegenerateGeometryError,
    FilterError,
    FilterParams,
    MeasurementRejected,
    RangeEKF,
    StateEstimate,
    composed_attitude,
    predict,
    range_update,
    reset_attitude,
)
from .harness import (
    EnsembleSummary,
    RunError,
    RunLog,
    RunMetrics,
    Scenario,
    ScenarioError,
    load_scenario,
    monte_carlo,
    paper_scenario,
    run_scenario,
)
from .selection import AnchorScore, NoValidAnchorError, SelectionPolicy, score_anchor, select_anchor
from .sim import (
    Anchor,
    ImuSample,
    NoiseParams,
    RangeMeasurement,
    TrajectoryProfile,
    TruthState,
    generate_trajectory,
    synth_imu,
    synth_range,
)
from .so3 import rotation_angle_deg, rotvec_to_rotation, skew

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "AnchorScore",
    "composed_attitude",
    "CovarianceError",
    "DegenerateGeometryError",
    "EnsembleSummary",
    "FilterError",
    "FilterParams",
    "generate_trajectory",
    "ImuSample",
    "load_scenario",
    "MeasurementRejected",
    "monte_carlo",
    "NoiseParams",
    "NoValidAnchorError",
    "paper_scenario",
    "predict",
    "range_update",
    "RangeEKF",
    "RangeMeasurement",
    "reset_attitude",
    "rotation_angle_deg",
    "rotvec_to_rotation",
    "run_scenario",
    "RunError",
    "RunLog",
    "RunMetrics",
    "Scenario",
    "ScenarioError",
    "score_anchor",
    "select_anchor",
    "SelectionPolicy",
    "skew",
    "StateEstimate",
    "synth_imu",
    "synth_range",
    "TrajectoryProfile",
    "TruthState",
]
