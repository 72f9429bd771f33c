"""Sampling-based MPC on a learned ensemble: TS1 rollouts, CEM and MPPI."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .ensemble import Ensemble
from .env import Action, EnvConfig, Goal, ModelState, reward_batch


def _env_bounds(env_config: EnvConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    return (
        (-env_config.dy_max, -env_config.dtheta_max),
        (env_config.dy_max, env_config.dtheta_max),
    )


@dataclass(frozen=True)
class CemConfig:
    horizon: int = 20
    population: int = 400
    elites: int = 40
    iterations: int = 5
    alpha: float = 0.1  # smoothing toward the previous distribution
    low: tuple = (-0.001, -math.pi / 180.0)
    high: tuple = (0.001, math.pi / 180.0)

    def __post_init__(self):
        if not 0 < self.elites <= self.population:
            raise ValueError(f"need 0 < elites <= population, got {self.elites}/{self.population}")
        if self.horizon < 1 or self.iterations < 1:
            raise ValueError("horizon and iterations must be >= 1")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError(f"invalid bounds {self.low} .. {self.high}")

    @classmethod
    def from_env(cls, env_config: EnvConfig, **overrides) -> "CemConfig":
        lo, hi = _env_bounds(env_config)
        return cls(low=lo, high=hi, **overrides)


@dataclass(frozen=True)
class MppiConfig:
    horizon: int = 20
    samples: int = 400
    iterations: int = 1  # re-center and resample; 1 = classic single-shot MPPI
    sigma_decay: float = 1.0  # per-iteration shrink of the sampling std
    temperature: float = 0.02
    sigma: tuple = (0.0005, math.pi / 360.0)  # exploration std per action dim
    low: tuple = (-0.001, -math.pi / 180.0)
    high: tuple = (0.001, math.pi / 180.0)

    def __post_init__(self):
        if self.horizon < 1 or self.samples < 1 or self.iterations < 1:
            raise ValueError("horizon, samples, and iterations must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 < self.sigma_decay <= 1.0:
            raise ValueError(f"sigma_decay must be in (0, 1], got {self.sigma_decay}")

    @classmethod
    def from_env(cls, env_config: EnvConfig, **overrides) -> "MppiConfig":
        lo, hi = _env_bounds(env_config)
        return cls(low=lo, high=hi, **overrides)


# -- model rollouts ------------------------------------------------------------


def rollout_returns(
    ensemble: Ensemble,
    start_state: np.ndarray,
    action_batch: np.ndarray,
    goal: Goal,
    env_config: EnvConfig,
    rng: np.random.Generator,
    particles: int = 20,
    return_trajectories: bool = False,
):
    """Mean TS1 return of each action sequence.

    action_batch has shape (N, H, A). Each sequence is evaluated with
    `particles` rollouts; at every step each particle independently redraws
    which ensemble member it transitions through (TS1).
    """
    n, horizon, _ = action_batch.shape
    rows = n * particles
    states = np.tile(np.asarray(start_state, dtype=np.float64), (rows, 1))
    returns = np.zeros(rows)
    trajs = [states.copy()] if return_trajectories else None
    for h in range(horizon):
        acts = np.repeat(action_batch[:, h, :], particles, axis=0)
        members = rng.integers(0, ensemble.n_members, size=rows)
        states = ensemble.predict_batch(states, acts, members, rng)
        returns += reward_batch(states, goal, env_config)
        if return_trajectories:
            trajs.append(states.copy())
    per_seq = returns.reshape(n, particles).mean(axis=1)
    if return_trajectories:
        # (H+1, N, particles, D) -> (N, particles, H+1, D)
        stacked = np.stack(trajs).reshape(horizon + 1, n, particles, -1).transpose(1, 2, 0, 3)
        return per_seq, stacked
    return per_seq


def rollout_ts1(
    ensemble: Ensemble,
    start_state,
    actions: np.ndarray,
    goal: Goal,
    env_config: EnvConfig,
    rng: np.random.Generator,
    particles: int = 20,
) -> tuple[np.ndarray, float]:
    """Trajectory of the first particle and the mean return of one sequence."""
    start = start_state.as_array() if isinstance(start_state, ModelState) else start_state
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim != 2:
        raise ValueError(f"actions must be (H, A), got shape {actions.shape}")
    ret, trajs = rollout_returns(
        ensemble, start, actions[None], goal, env_config, rng,
        particles=particles, return_trajectories=True,
    )
    return trajs[0, 0], float(ret[0])


# -- optimizers ----------------------------------------------------------------


def cem_optimize(
    objective,
    config: CemConfig,
    rng: np.random.Generator,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """Cross-entropy method over action sequences in a box.

    objective maps (N, H, A) to (N,) returns (higher is better). Returns the
    final distribution mean and per-iteration diagnostics.
    """
    lo = np.asarray(config.low, dtype=np.float64)
    hi = np.asarray(config.high, dtype=np.float64)
    h, a = config.horizon, lo.size
    mean = np.zeros((h, a)) if warm_start is None else np.array(warm_start, dtype=np.float64)
    if mean.shape != (h, a):
        raise ValueError(f"warm start shape {mean.shape} != ({h}, {a})")
    std = np.tile((hi - lo) / 2.0, (h, 1))
    elite_means = []
    for _ in range(config.iterations):
        noise = rng.standard_normal((config.population, h, a))
        samples = np.clip(mean + std * noise, lo, hi)
        returns = objective(samples)
        order = np.argsort(-returns, kind="stable")  # deterministic under ties
        elite = samples[order[: config.elites]]
        elite_means.append(float(returns[order[: config.elites]].mean()))
        mean = config.alpha * mean + (1.0 - config.alpha) * elite.mean(axis=0)
        std = config.alpha * std + (1.0 - config.alpha) * elite.std(axis=0)
    return np.clip(mean, lo, hi), {"elite_mean_returns": elite_means}


def mppi_optimize(
    objective,
    config: MppiConfig,
    rng: np.random.Generator,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """MPPI: exponentially weighted average of noisy plans around a nominal.

    The softmax temperature is relative to the batch return spread
    (max - mean), which keeps the selection pressure meaningful whatever the
    return scale; each extra iteration re-centers on the weighted mean and
    shrinks the noise by sigma_decay.
    """
    lo = np.asarray(config.low, dtype=np.float64)
    hi = np.asarray(config.high, dtype=np.float64)
    h, a = config.horizon, lo.size
    nominal = np.zeros((h, a)) if warm_start is None else np.array(warm_start, dtype=np.float64)
    if nominal.shape != (h, a):
        raise ValueError(f"warm start shape {nominal.shape} != ({h}, {a})")
    sigma = np.asarray(config.sigma, dtype=np.float64)
    entropy = math.nan
    for _ in range(config.iterations):
        noise = rng.standard_normal((config.samples, h, a)) * sigma
        samples = np.clip(nominal + noise, lo, hi)
        returns = objective(samples)
        spread = float(returns.max() - returns.mean())
        lam = config.temperature * max(spread, 1e-12)
        w = np.exp((returns - returns.max()) / lam)
        w /= w.sum()
        nominal = np.clip(np.einsum("n,nha->ha", w, samples), lo, hi)
        entropy = float(-(w * np.log(np.maximum(w, 1e-300))).sum())
        sigma = sigma * config.sigma_decay
    return nominal, {"weight_entropy": entropy}


def cem_plan(
    ensemble: Ensemble,
    start_state,
    goal: Goal,
    env_config: EnvConfig,
    config: CemConfig,
    rng: np.random.Generator,
    particles: int = 20,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    start = start_state.as_array() if isinstance(start_state, ModelState) else start_state

    def objective(batch):
        return rollout_returns(
            ensemble, start, batch, goal, env_config, rng, particles=particles
        )

    return cem_optimize(objective, config, rng, warm_start=warm_start)


def mppi_plan(
    ensemble: Ensemble,
    start_state,
    goal: Goal,
    env_config: EnvConfig,
    config: MppiConfig,
    rng: np.random.Generator,
    particles: int = 20,
    warm_start: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    start = start_state.as_array() if isinstance(start_state, ModelState) else start_state

    def objective(batch):
        return rollout_returns(
            ensemble, start, batch, goal, env_config, rng, particles=particles
        )

    return mppi_optimize(objective, config, rng, warm_start=warm_start)


class MpcController:
    """Receding-horizon controller: plan, execute the first action, shift.

    The warm start for the next step is the remainder of the last plan with
    its final action repeated.
    """

    def __init__(
        self,
        ensemble: Ensemble,
        env_config: EnvConfig,
        config: CemConfig | MppiConfig,
        rng: np.random.Generator,
        particles: int = 20,
    ):
        self.ensemble = ensemble
        self.env_config = env_config
        self.config = config
        self.rng = rng
        self.particles = particles
        self._warm: np.ndarray | None = None
        if isinstance(config, CemConfig):
            self._plan = cem_plan
        elif isinstance(config, MppiConfig):
            self._plan = mppi_plan
        else:
            raise TypeError(f"unsupported planner config {type(config).__name__}")

    def reset(self, rng: np.random.Generator | None = None) -> None:
        self._warm = None
        if rng is not None:
            self.rng = rng

    def act(self, state, goal: Goal) -> Action:
        plan, _ = self._plan(
            self.ensemble, state, goal, self.env_config, self.config, self.rng,
            particles=self.particles, warm_start=self._warm,
        )
        self._warm = np.concatenate([plan[1:], plan[-1:]], axis=0)
        return Action(dy=float(plan[0, 0]), dtheta=float(plan[0, 1]))


def planner_config_to_dict(config) -> dict:
    kind = "cem" if isinstance(config, CemConfig) else "mppi"
    d = {"kind": kind}
    for f in fields(config):
        v = getattr(config, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def planner_config_from_dict(data: dict):
    data = dict(data)
    kind = data.pop("kind", "cem")
    cls = {"cem": CemConfig, "mppi": MppiConfig}.get(kind)
    if cls is None:
        raise ValueError(f"unknown planner kind {kind!r}; options: cem, mppi")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {kind} planner fields: {sorted(unknown)}")
    for key in ("low", "high", "sigma"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    return cls(**data)
