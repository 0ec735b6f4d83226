"""Expected-energy base-stop planning for observe-then-manipulate mobile manipulation."""

from .errors import (
    ContainmentError,
    EmptyTaskSpaceError,
    GenerationError,
    InfeasibleCoverageError,
    InputError,
    ObservationError,
    RhtpError,
    SceneFormatError,
    SceneValidationError,
    SolverLimitError,
)
from .executor import (
    EpisodeMetrics,
    Event,
    draw_truth,
    naive_capm_episode,
    simulate_episode,
)
from .partition import PartitionSet, Region, complete_partition, compute_partition
from .planner import (
    Plan,
    PlanningConfig,
    PlanningResult,
    Stop,
    coverage_probability,
    extract_plan,
    plan_scene,
    plan_to_dict,
    save_plan,
)
from .reachability import (
    Annulus,
    BaseGrid,
    Ptrm,
    build_ptrm,
    check_containment,
    collapse,
    manipulation_region,
    observation_region,
    reach_probability,
)
from .scene import (
    ArmParams,
    CollapsedBelief,
    Rect,
    Scene,
    Troi,
    TruncatedBelief,
    generate_scene,
    load_scene,
    sample_mpoi,
    save_scene,
)

__version__ = "0.1.0"

__all__ = [
    "Annulus",
    "ArmParams",
    "BaseGrid",
    "CollapsedBelief",
    "ContainmentError",
    "EmptyTaskSpaceError",
    "EpisodeMetrics",
    "Event",
    "GenerationError",
    "InfeasibleCoverageError",
    "InputError",
    "ObservationError",
    "PartitionSet",
    "Plan",
    "PlanningConfig",
    "PlanningResult",
    "Ptrm",
    "Rect",
    "Region",
    "RhtpError",
    "Scene",
    "SceneFormatError",
    "SceneValidationError",
    "SolverLimitError",
    "Stop",
    "Troi",
    "TruncatedBelief",
    "build_ptrm",
    "check_containment",
    "collapse",
    "complete_partition",
    "compute_partition",
    "coverage_probability",
    "draw_truth",
    "extract_plan",
    "generate_scene",
    "load_scene",
    "manipulation_region",
    "naive_capm_episode",
    "observation_region",
    "plan_scene",
    "plan_to_dict",
    "reach_probability",
    "sample_mpoi",
    "save_plan",
    "save_scene",
    "simulate_episode",
]
