"""Context-aware 3D object placement: energies, solver, judge and benchmark.

Units are meters and degrees; y is up and footprints live on the (x, z)
ground plane. See the README for the coordinate conventions in full.
"""

from .energy import (
    AffordanceSpec,
    ConstraintSpec,
    CultureSpec,
    EnergyBreakdown,
    PairRelation,
    PlacementProblem,
    SocialSpec,
    compile_constraints,
    total_energy,
)
from .judge import Verdict, Violation, judge
from .optimize import SolveConfig, SolveResult, apply_correction, solve
from .pipeline import Instruction, RunRecord, run
from .scene import (
    Aabb,
    AssetSpec,
    ObjectInstance,
    Orientation,
    ScaleVec,
    Scene,
    SceneValidationError,
    UnknownAnchorError,
    UnknownAssetError,
    UnknownObjectError,
    Vec3,
    bearing_deg,
    front_yaw,
    wrap_signed,
    wrap_yaw,
)
from .sceneio import load_catalog, load_scene, save_scene
from .tasks import TaskDef, TaskStep, evaluate, load_task, run_task, success

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "AffordanceSpec",
    "AssetSpec",
    "ConstraintSpec",
    "CultureSpec",
    "EnergyBreakdown",
    "Instruction",
    "ObjectInstance",
    "Orientation",
    "PairRelation",
    "PlacementProblem",
    "RunRecord",
    "ScaleVec",
    "Scene",
    "SceneValidationError",
    "SocialSpec",
    "SolveConfig",
    "SolveResult",
    "TaskDef",
    "TaskStep",
    "UnknownAnchorError",
    "UnknownAssetError",
    "UnknownObjectError",
    "Vec3",
    "Verdict",
    "Violation",
    "apply_correction",
    "bearing_deg",
    "compile_constraints",
    "evaluate",
    "front_yaw",
    "judge",
    "load_catalog",
    "load_scene",
    "load_task",
    "run",
    "run_task",
    "save_scene",
    "solve",
    "success",
    "total_energy",
    "wrap_signed",
    "wrap_yaw",
    "__version__",
]
