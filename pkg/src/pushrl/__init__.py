"""Planar pushing workbench: quasi-static simulator, learned-model and
model-free agents, and an evaluation harness.
"""

from .env import Action, EnvConfig, Goal, ModelState, PolicyObservation, PushEnv, Workspace
from .geometry import ConvexShape, Pose2, wrap_angle
from .objects import ObjectSpec, get_object, load_object_library
from .physics import (
    Contact,
    ContactMode,
    PusherParams,
    QuasiStaticSolution,
    SliderParams,
    closest_contact,
    detect_contact,
    quasi_static_solve,
    quasi_static_step,
)
from .planning import CemConfig, MpcController, MppiConfig, cem_plan, mppi_plan

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CemConfig",
    "Contact",
    "ContactMode",
    "ConvexShape",
    "EnvConfig",
    "Goal",
    "ModelState",
    "MpcController",
    "MppiConfig",
    "ObjectSpec",
    "PolicyObservation",
    "Pose2",
    "PushEnv",
    "PusherParams",
    "QuasiStaticSolution",
    "SliderParams",
    "Workspace",
    "__version__",
    "cem_plan",
    "closest_contact",
    "detect_contact",
    "get_object",
    "load_object_library",
    "mppi_plan",
    "quasi_static_solve",
    "quasi_static_step",
    "wrap_angle",
]
