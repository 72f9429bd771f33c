"""Goal-conditioned planar pushing environment.

The pusher advances a fixed 1 mm along its own heading every step; the agent
steers with a lateral offset dy and a heading change dtheta. Episodes end on
reaching the goal (contact within the success tolerance), losing contact, or
timing out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import rng as rng_mod
from .geometry import ConvexShape, Pose2, rotate, wrap_angle
from .physics import (
    Contact,
    ContactMode,
    PusherParams,
    SliderParams,
    closest_contact,
    contact_frame,
    quasi_static_step,
)

START_DEPTH = 0.002  # reset tip penetration


@dataclass(frozen=True)
class Workspace:
    x_min: float = 0.0
    x_max: float = 0.4
    y_min: float = -0.3
    y_max: float = 0.3

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty workspace {self!r}")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class EnvConfig:
    workspace: Workspace = field(default_factory=Workspace)
    goal_band_width: float = 0.05
    approach_distance: float = 0.1  # reward switches to position shaping inside this
    success_tolerance: float = 0.025
    dx_fixed: float = 0.001
    dy_max: float = 0.001
    dtheta_max: float = math.pi / 180.0
    max_steps: int = 1000
    contact_loss_terminates: bool = True
    start_orientation: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.success_tolerance < self.approach_distance:
            raise ValueError(
                "need 0 < success_tolerance < approach_distance, got "
                f"{self.success_tolerance!r}, {self.approach_distance!r}"
            )
        w, h = self.workspace.x_max - self.workspace.x_min, self.workspace.y_max - self.workspace.y_min
        if not 0.0 < self.goal_band_width < min(w, h) / 2.0:
            raise ValueError(f"goal_band_width {self.goal_band_width!r} does not fit the workspace")
        if self.dx_fixed <= 0.0 or self.dy_max < 0.0 or self.dtheta_max < 0.0:
            raise ValueError("action bounds must be positive (dx_fixed) / non-negative")
        if math.hypot(self.dx_fixed, self.dy_max) > 0.002:
            raise ValueError("per-step translation exceeds the quasi-static small-motion bound")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps!r}")

    def to_dict(self) -> dict:
        return {
            "workspace": [self.workspace.x_min, self.workspace.x_max,
                          self.workspace.y_min, self.workspace.y_max],
            "goal_band_width": self.goal_band_width,
            "approach_distance": self.approach_distance,
            "success_tolerance": self.success_tolerance,
            "dx_fixed": self.dx_fixed,
            "dy_max": self.dy_max,
            "dtheta_max": self.dtheta_max,
            "max_steps": self.max_steps,
            "contact_loss_terminates": self.contact_loss_terminates,
            "start_orientation": self.start_orientation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown EnvConfig fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "workspace" in kwargs:
            ws = kwargs["workspace"]
            if isinstance(ws, (list, tuple)):
                kwargs["workspace"] = Workspace(*map(float, ws))
            elif isinstance(ws, dict):
                kwargs["workspace"] = Workspace(**ws)
        return cls(**kwargs)


@dataclass(frozen=True)
class Goal:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Action:
    """Lateral offset (m) and heading change (rad), both in the pusher frame."""

    dy: float
    dtheta: float


@dataclass(frozen=True)
class PolicyObservation:
    """Goal-relative observation: surface pose of the pusher in the contact
    frame is implicit in (x_po, y_po, theta_po) = contact frame seen from the
    pusher; (x_og, y_og, theta_og) place the goal in the contact frame, with
    theta_og the goal bearing relative to the push direction."""

    x_po: float
    y_po: float
    theta_po: float
    x_og: float
    y_og: float
    theta_og: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_po, self.y_po, self.theta_po,
                         self.x_og, self.y_og, self.theta_og])


@dataclass(frozen=True)
class ModelState:
    """Goal-free state for dynamics learning: contact frame in the pusher
    frame plus the world contact frame."""

    x_po: float
    y_po: float
    theta_po: float
    x_o: float
    y_o: float
    theta_o: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_po, self.y_po, self.theta_po,
                         self.x_o, self.y_o, self.theta_o])

    @classmethod
    def from_array(cls, a) -> "ModelState":
        return cls(*(float(v) for v in a))

    def pusher_pose(self) -> Pose2:
        """World pusher pose recovered by composing the two frames."""
        world = Pose2(self.x_o, self.y_o, self.theta_o)
        rel = Pose2(self.x_po, self.y_po, self.theta_po)
        # world = pusher . rel  =>  pusher = world . rel^-1
        inv = Pose2(*rotate(-rel.theta, -rel.x, -rel.y), -rel.theta)
        return world.compose(inv)


@dataclass(frozen=True)
class StepResult:
    observation: PolicyObservation
    model_state: ModelState
    reward: float
    terminated: bool  # success: contact within tolerance of the goal
    failed: bool      # contact lost
    truncated: bool   # step budget exhausted
    info: dict


def bearing(from_xy: tuple[float, float], to_xy: tuple[float, float]) -> float:
    """World-frame direction from one point toward another; 0 when coincident."""
    return math.atan2(to_xy[1] - from_xy[1], to_xy[0] - from_xy[0])


def reward(frame: Pose2, pusher_theta: float, goal: Goal, config: EnvConfig) -> float:
    """Two-zone shaping: align headings when far, close distance when near.

    Far from the goal the penalty is (1 - cos) misalignment of the push
    direction with the goal bearing plus pusher/contact misalignment; inside
    approach_distance the first term becomes the Euclidean distance itself.
    """
    dist = math.hypot(goal.x - frame.x, goal.y - frame.y)
    align = 1.0 - math.cos(pusher_theta - frame.theta)
    if dist > config.approach_distance:
        goal_dir = bearing((frame.x, frame.y), (goal.x, goal.y))
        return -((1.0 - math.cos(frame.theta - goal_dir)) + align)
    return -(dist + align)


def reward_batch(states: np.ndarray, goal: Goal, config: EnvConfig) -> np.ndarray:
    """Vectorized reward over ModelState rows (shape (N, 6))."""
    ox, oy, oth = states[:, 3], states[:, 4], states[:, 5]
    pth = oth - states[:, 2]  # pusher heading; wrap is irrelevant inside cos
    dx, dy = goal.x - ox, goal.y - oy
    dist = np.hypot(dx, dy)
    align = 1.0 - np.cos(pth - oth)
    goal_dir = np.arctan2(dy, dx)
    far = -((1.0 - np.cos(oth - goal_dir)) + align)
    near = -(dist + align)
    return np.where(dist > config.approach_distance, far, near)


class PushEnv:
    """Deterministic physics; the only randomness is goal sampling at reset."""

    def __init__(
        self,
        config: EnvConfig,
        shape: ConvexShape,
        slider: SliderParams,
        pusher: PusherParams | None = None,
        seed: int = 0,
        contact_angle_offset: float = 0.0,
    ):
        self.config = config
        self.shape = shape
        self.slider = slider
        self.pusher = pusher if pusher is not None else PusherParams()
        slider.validate_for_shape(shape)
        self._seed = seed
        self._reset_rng = rng_mod.stream(seed, "env-goals")
        self.contact_angle_offset = contact_angle_offset
        self._pusher_pose: Pose2 | None = None
        self._object_pose: Pose2 | None = None
        self._contact: Contact | None = None
        self._goal: Goal | None = None
        self._steps = 0
        self._done = True

    # -- state accessors used by the harness ---------------------------------

    @property
    def pusher_pose(self) -> Pose2:
        return self._pusher_pose

    @property
    def object_pose(self) -> Pose2:
        return self._object_pose

    @property
    def contact(self) -> Contact:
        return self._contact

    @property
    def goal(self) -> Goal:
        return self._goal

    @property
    def steps(self) -> int:
        return self._steps

    # -------------------------------------------------------------------------

    def sample_goal(self, generator: np.random.Generator) -> Goal:
        """Uniform sample from the band of width goal_band_width inside the
        workspace edge (rejection from the full workspace)."""
        ws, w = self.config.workspace, self.config.goal_band_width
        while True:
            x = generator.uniform(ws.x_min, ws.x_max)
            y = generator.uniform(ws.y_min, ws.y_max)
            in_core = (ws.x_min + w < x < ws.x_max - w) and (ws.y_min + w < y < ws.y_max - w)
            if not in_core:
                return Goal(x, y)

    def reset(self, seed: int | None = None, goal: Goal | None = None):
        if seed is not None:
            self._reset_rng = rng_mod.stream(seed, "env-goals")
        if goal is None:
            goal = self.sample_goal(self._reset_rng)
        elif not self.config.workspace.contains(goal.x, goal.y):
            raise ValueError(f"goal {goal} lies outside the workspace {self.config.workspace}")
        self._goal = goal

        # Slider placed so its -x support face sits START_DEPTH into the tip
        # circle of a pusher at the origin heading +x.
        theta0 = self.config.start_orientation
        face_x = self.pusher.tip_radius - START_DEPTH
        s_min = min(rotate(theta0, vx, vy)[0] for vx, vy in self.shape.vertices)
        obj = Pose2(face_x - s_min, 0.0, theta0)
        if self.contact_angle_offset != 0.0:
            # Disturbance: rotate the slider about the nominal contact point.
            a = self.contact_angle_offset
            ox, oy = rotate(a, obj.x - face_x, obj.y)
            obj = Pose2(face_x + ox, oy, obj.theta + a)
        self._object_pose = obj
        self._pusher_pose = Pose2(0.0, 0.0, 0.0)
        self._contact = closest_contact(self._pusher_pose, self.pusher, self.shape, obj)
        if self._contact.depth <= 0.0:
            raise RuntimeError(
                f"reset produced no contact (depth {self._contact.depth:.2e}); "
                "start_orientation/contact_angle_offset leave the pusher off the object"
            )
        self._steps = 0
        self._done = False
        return self._observe()

    def step(self, action: Action) -> StepResult:
        if self._done:
            raise RuntimeError("episode finished; call reset() first")
        cfg = self.config
        dy = min(max(action.dy, -cfg.dy_max), cfg.dy_max)
        dth = min(max(action.dtheta, -cfg.dtheta_max), cfg.dtheta_max)

        motion = (cfg.dx_fixed, dy, dth)
        if self._contact.depth > 0.0:
            new_obj, step_mode = quasi_static_step(
                self._object_pose, self.slider, self._contact, motion, self._pusher_pose
            )
        else:
            # Only reachable when contact loss does not end the episode: the
            # pusher moves through free space until it touches again.
            new_obj, step_mode = self._object_pose, ContactMode.SEPARATED
        p = self._pusher_pose
        mx, my = rotate(p.theta, cfg.dx_fixed, dy)
        new_pusher = Pose2(p.x + mx, p.y + my, p.theta + dth)

        self._object_pose = new_obj
        self._pusher_pose = new_pusher
        self._contact = closest_contact(new_pusher, self.pusher, self.shape, new_obj)
        self._steps += 1

        frame = contact_frame(self._contact)
        dist = math.hypot(self._goal.x - frame.x, self._goal.y - frame.y)
        r = reward(frame, new_pusher.theta, self._goal, cfg)

        terminated = dist <= cfg.success_tolerance
        failed = (not terminated) and cfg.contact_loss_terminates and self._contact.depth <= 0.0
        truncated = (not terminated) and (not failed) and self._steps >= cfg.max_steps
        self._done = terminated or failed or truncated

        obs, state = self._observe()
        info = {"contact_mode": step_mode.value, "distance": dist}
        return StepResult(obs, state, r, terminated, failed, truncated, info)

    def _observe(self) -> tuple[PolicyObservation, ModelState]:
        frame = contact_frame(self._contact)
        rel = frame.relative_to(self._pusher_pose)
        g = self._goal
        gx, gy = rotate(-frame.theta, g.x - frame.x, g.y - frame.y)
        th_og = wrap_angle(bearing((frame.x, frame.y), (g.x, g.y)) - frame.theta)
        obs = PolicyObservation(rel.x, rel.y, rel.theta, gx, gy, th_og)
        state = ModelState(rel.x, rel.y, rel.theta, frame.x, frame.y, frame.theta)
        return obs, state
