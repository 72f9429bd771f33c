"""Evaluation harness: goal grids, scenario rollouts, CSV/JSON export.

episodes.csv has one row per step (step 0 is the initial state with zero
action and reward) with columns

    episode_id,step,px,py,ptheta,ox,oy,otheta,cx,cy,ctheta,dy,dtheta,reward,mode,status

where p* is the pusher pose, o* the object pose, c* the contact frame, and
status is the episode outcome repeated on every row. summary.json carries the
scenario echo, per-episode outcomes, and aggregate stats. Floats are written
with shortest round-trip repr, so re-importing reproduces values exactly.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .agents import MpcAgent, PolicyAgent, RandomAgent, StraightAgent
from .checkpoint import load_checkpoint
from .ensemble import ensemble_from_checkpoint
from .env import EnvConfig, Goal, PushEnv, Workspace
from .objects import ObjectSpec, get_object, load_object_library
from .physics import contact_frame
from .planning import CemConfig, planner_config_from_dict
from .sac import policy_from_checkpoint

CSV_COLUMNS = [
    "episode_id", "step", "px", "py", "ptheta", "ox", "oy", "otheta",
    "cx", "cy", "ctheta", "dy", "dtheta", "reward", "mode", "status",
]

STATUS_SUCCESS = "success"
STATUS_CONTACT_LOST = "contact_lost"
STATUS_TIMEOUT = "timeout"
STATUS_BUDGET = "budget"  # cut short by an external step budget


def goal_grid(
    workspace: Workspace,
    counts: tuple[int, int] = (6, 9),
    min_distance: float = 0.0,
) -> list[Goal]:
    """Cell-center lattice over the workspace, ordered by x then y.

    Goals closer than min_distance to the pusher start (the origin) are
    dropped; they sit inside the controller's minimum turning envelope.
    """
    nx, ny = counts
    if nx < 1 or ny < 1:
        raise ValueError(f"grid counts must be positive, got {counts}")
    dx = (workspace.x_max - workspace.x_min) / nx
    dy = (workspace.y_max - workspace.y_min) / ny
    goals = []
    for ix in range(nx):
        for iy in range(ny):
            x = workspace.x_min + (ix + 0.5) * dx
            y = workspace.y_min + (iy + 0.5) * dy
            if math.hypot(x, y) >= min_distance:
                goals.append(Goal(x, y))
    return goals


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "scenario"
    object: str = "square-0.075"
    agent: str = "straight"  # mb | mf | random | straight
    checkpoint: str | None = None
    goals: tuple | None = None  # explicit ((x, y), ...); overrides grid
    grid: dict | None = None  # {"counts": [nx, ny], "min_distance": m}
    trials: int = 1
    disturbance: dict | None = None
    seed: int = 0
    env: dict = field(default_factory=dict)
    planner: dict | None = None
    particles: int = 20

    _AGENTS = ("mb", "mf", "random", "straight")

    def __post_init__(self):
        if self.agent not in self._AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}; options: {', '.join(self._AGENTS)}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.goals is not None:
            object.__setattr__(
                self, "goals", tuple((float(x), float(y)) for x, y in self.goals)
            )
        if self.disturbance is not None:
            kind = self.disturbance.get("kind")
            if kind == "contact_angle_offset":
                if "radians" not in self.disturbance:
                    raise ValueError("contact_angle_offset disturbance needs 'radians'")
            elif kind == "cof_offset":
                if "offset" not in self.disturbance:
                    raise ValueError("cof_offset disturbance needs 'offset': [x, y]")
            else:
                raise ValueError(
                    f"unknown disturbance kind {kind!r}; "
                    "options: contact_angle_offset, cof_offset"
                )

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "object": self.object,
            "agent": self.agent,
            "checkpoint": self.checkpoint,
            "goals": [list(g) for g in self.goals] if self.goals is not None else None,
            "grid": self.grid,
            "trials": self.trials,
            "disturbance": self.disturbance,
            "seed": self.seed,
            "env": dict(self.env),
            "planner": self.planner,
            "particles": self.particles,
        }
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls) if not f.name.startswith("_")}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ScenarioSpec fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EpisodeLog:
    episode_id: int
    goal: Goal
    seed: int
    status: str
    episode_return: float
    wall_time: float  # in-memory only; never serialized (would break run identity)
    data: np.ndarray  # (steps + 1, 13): poses, contact frame, action, reward
    modes: list

    @property
    def n_steps(self) -> int:
        return self.data.shape[0] - 1

    @property
    def contact_xy(self) -> np.ndarray:
        return self.data[:, 6:8]

    def path_length(self) -> float:
        seg = np.diff(self.contact_xy, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())

    def straight_line(self) -> float:
        d = self.contact_xy[-1] - self.contact_xy[0]
        return float(np.hypot(d[0], d[1]))


@dataclass
class SummaryStats:
    episodes: int
    success_rate: float
    mean_return: float
    std_return: float
    mean_path_length: float | None  # successes only
    mean_success_steps: float | None
    status_counts: dict

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_return": self.mean_return,
            "std_return": self.std_return,
            "mean_path_length": self.mean_path_length,
            "mean_success_steps": self.mean_success_steps,
            "status_counts": dict(self.status_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryStats":
        return cls(**d)


def summarize(logs: list[EpisodeLog]) -> SummaryStats:
    if not logs:
        raise ValueError("no episodes to summarize")
    returns = np.array([log.episode_return for log in logs])
    succ = [log for log in logs if log.status == STATUS_SUCCESS]
    counts: dict = {}
    for log in logs:
        counts[log.status] = counts.get(log.status, 0) + 1
    return SummaryStats(
        episodes=len(logs),
        success_rate=len(succ) / len(logs),
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        mean_path_length=float(np.mean([l.path_length() for l in succ])) if succ else None,
        mean_success_steps=float(np.mean([l.n_steps for l in succ])) if succ else None,
        status_counts=counts,
    )


def build_env(spec: ScenarioSpec, library: dict[str, ObjectSpec] | None = None) -> PushEnv:
    obj = get_object(spec.object, library)
    angle = 0.0
    if spec.disturbance is not None:
        kind = spec.disturbance["kind"]
        if kind == "cof_offset":
            obj = obj.with_cof_offset(tuple(spec.disturbance["offset"]))
        elif kind == "contact_angle_offset":
            angle = float(spec.disturbance["radians"])
    env_dict = EnvConfig().to_dict()
    env_dict.update(spec.env)
    config = EnvConfig.from_dict(env_dict)
    return PushEnv(
        config, obj.shape, obj.slider, seed=spec.seed, contact_angle_offset=angle
    )


def build_agent(spec: ScenarioSpec, env: PushEnv):
    if spec.agent == "straight":
        return StraightAgent()
    if spec.agent == "random":
        return RandomAgent(env.config)
    if spec.checkpoint is None:
        raise ValueError(f"agent {spec.agent!r} requires a checkpoint path")
    meta, arrays = load_checkpoint(spec.checkpoint)
    if spec.agent == "mb":
        ensemble = ensemble_from_checkpoint(meta, arrays, rng_mod.stream(0, "ckpt-load"))
        if spec.planner is not None:
            planner = planner_config_from_dict(spec.planner)
        else:
            sibling = Path(spec.checkpoint).with_name("planner.json")
            if sibling.exists():
                planner = planner_config_from_dict(json.loads(sibling.read_text()))
            else:
                planner = CemConfig.from_env(env.config)
        return MpcAgent(ensemble, env.config, planner, particles=spec.particles)
    policy, scale = policy_from_checkpoint(meta, arrays, rng_mod.stream(0, "ckpt-load"))
    return PolicyAgent(policy, scale)


def run_episode_logged(env: PushEnv, agent, episode_id: int, goal: Goal, seed: int) -> EpisodeLog:
    t0 = time.perf_counter()
    obs, state = env.reset(seed=seed, goal=goal)
    agent.begin_episode(seed)
    rows = []
    modes = ["Start"]
    frame = contact_frame(env.contact)
    rows.append([
        env.pusher_pose.x, env.pusher_pose.y, env.pusher_pose.theta,
        env.object_pose.x, env.object_pose.y, env.object_pose.theta,
        frame.x, frame.y, frame.theta, 0.0, 0.0, 0.0,
    ])
    total = 0.0
    status = STATUS_BUDGET
    while True:
        action = agent.act(obs, state, env.goal)
        res = env.step(action)
        total += res.reward
        frame = contact_frame(env.contact)
        rows.append([
            env.pusher_pose.x, env.pusher_pose.y, env.pusher_pose.theta,
            env.object_pose.x, env.object_pose.y, env.object_pose.theta,
            frame.x, frame.y, frame.theta,
            min(max(action.dy, -env.config.dy_max), env.config.dy_max),
            min(max(action.dtheta, -env.config.dtheta_max), env.config.dtheta_max),
            res.reward,
        ])
        modes.append(res.info["contact_mode"])
        obs, state = res.observation, res.model_state
        if res.terminated:
            status = STATUS_SUCCESS
            break
        if res.failed:
            status = STATUS_CONTACT_LOST
            break
        if res.truncated:
            status = STATUS_TIMEOUT
            break
    return EpisodeLog(
        episode_id=episode_id,
        goal=goal,
        seed=seed,
        status=status,
        episode_return=total,
        wall_time=time.perf_counter() - t0,
        data=np.array(rows),
        modes=modes,
    )


def scenario_goals(spec: ScenarioSpec, env: PushEnv) -> list[Goal]:
    if spec.goals is not None:
        goals = [Goal(x, y) for x, y in spec.goals]
        for g in goals:
            if not env.config.workspace.contains(g.x, g.y):
                raise ValueError(f"goal {g} lies outside the workspace")
        return goals
    grid = spec.grid or {}
    counts = tuple(grid.get("counts", (6, 9)))
    min_distance = float(grid.get("min_distance", 0.0))
    return goal_grid(env.config.workspace, counts=counts, min_distance=min_distance)


def run_scenario(
    spec: ScenarioSpec,
    library: dict[str, ObjectSpec] | None = None,
    agent=None,
    progress=None,
) -> tuple[list[EpisodeLog], SummaryStats]:
    """Run trials x goals episodes; per-episode seeds derive from spec.seed."""
    env = build_env(spec, library)
    if agent is None:
        agent = build_agent(spec, env)
    goals = scenario_goals(spec, env)
    logs: list[EpisodeLog] = []
    episode_id = 0
    for trial in range(spec.trials):
        for goal in goals:
            seed = rng_mod.derive_seed(spec.seed, "episode", episode_id)
            log = run_episode_logged(env, agent, episode_id, goal, seed)
            logs.append(log)
            if progress is not None:
                progress(log)
            episode_id += 1
    return logs, summarize(logs)


# -- serialization ---------------------------------------------------------------


def export_results(out_dir, spec: ScenarioSpec, logs: list[EpisodeLog], stats: SummaryStats) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "episodes.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for log in logs:
            n = log.data.shape[0]
            for step in range(n):
                row = [log.episode_id, step]
                row.extend(repr(float(v)) for v in log.data[step])
                row.append(log.modes[step])
                row.append(log.status)
                w.writerow(row)
    summary = {
        "schema_version": 1,
        "scenario": spec.to_dict(),
        "stats": stats.to_dict(),
        "episodes": [
            {
                "episode_id": log.episode_id,
                "goal": [log.goal.x, log.goal.y],
                "seed": log.seed,
                "status": log.status,
                "steps": log.n_steps,
                "return": log.episode_return,
            }
            for log in logs
        ],
    }
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")


def import_results(in_dir) -> tuple[ScenarioSpec, list[EpisodeLog], SummaryStats]:
    src = Path(in_dir)
    summary = json.loads((src / "summary.json").read_text())
    if summary.get("schema_version") != 1:
        raise ValueError(f"unsupported results schema {summary.get('schema_version')!r}")
    spec = ScenarioSpec.from_dict(summary["scenario"])
    stats = SummaryStats.from_dict(summary["stats"])
    meta = {e["episode_id"]: e for e in summary["episodes"]}
    by_episode: dict[int, list] = {}
    modes: dict[int, list] = {}
    status: dict[int, str] = {}
    with open(src / "episodes.csv", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"episodes.csv columns {header} != expected {CSV_COLUMNS}")
        for row in reader:
            eid = int(row[0])
            by_episode.setdefault(eid, []).append([float(v) for v in row[2:14]])
            modes.setdefault(eid, []).append(row[14])
            status[eid] = row[15]
    logs = []
    for eid in sorted(by_episode):
        m = meta[eid]
        logs.append(
            EpisodeLog(
                episode_id=eid,
                goal=Goal(*m["goal"]),
                seed=m["seed"],
                status=status[eid],
                episode_return=m["return"],
                wall_time=0.0,
                data=np.array(by_episode[eid]),
                modes=modes[eid],
            )
        )
    return spec, logs, stats
