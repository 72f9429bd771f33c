"""Model-based training loop: collect with MPC, refit the ensemble, repeat."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import rng as rng_mod
from .ensemble import Ensemble, TransitionBuffer, train_ensemble
from .env import Action, PushEnv
from .planning import CemConfig, MpcController, MppiConfig


@dataclass(frozen=True)
class PetsConfig:
    total_env_steps: int = 25_000
    initial_random_episodes: int = 5
    episodes_per_iteration: int = 1
    members: int = 5
    hidden: tuple = (200, 200, 200, 200)
    activation: str = "relu"
    train_epochs: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    holdout_fraction: float = 0.1
    patience: int = 5
    particles: int = 20
    buffer_capacity: int = 200_000

    def __post_init__(self):
        if self.total_env_steps < 1:
            raise ValueError("total_env_steps must be positive")
        if self.initial_random_episodes < 1:
            raise ValueError("need at least one random episode to seed the model")
        if not 0.0 < self.holdout_fraction < 0.5:
            raise ValueError(f"holdout_fraction must be in (0, 0.5), got {self.holdout_fraction}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, data: dict) -> "PetsConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown PetsConfig fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PetsLogRow:
    iteration: int
    env_steps: int
    episode_steps: int
    episode_return: float
    success: bool
    failed: bool
    holdout_nll: tuple  # per member; empty during the random phase

    CSV_HEADER = "iteration,env_steps,episode_steps,episode_return,success,failed,holdout_nll"

    def to_csv(self) -> str:
        nll = ";".join(repr(v) for v in self.holdout_nll)
        return (
            f"{self.iteration},{self.env_steps},{self.episode_steps},"
            f"{self.episode_return!r},{int(self.success)},{int(self.failed)},{nll}"
        )


def run_episode(
    env: PushEnv,
    act_fn,
    buffer: TransitionBuffer | None,
    seed: int,
    step_budget: int | None = None,
) -> tuple[float, int, bool, bool]:
    """Roll one episode, optionally recording transitions.

    Returns (return, steps, success, failed). A step_budget cuts the episode
    short without marking success or failure.
    """
    obs, state = env.reset(seed=seed)
    total = 0.0
    steps = 0
    while True:
        action = act_fn(obs, state, env.goal)
        result = env.step(action)
        if buffer is not None:
            buffer.add(state.as_array(), (action.dy, action.dtheta), result.model_state.as_array())
        total += result.reward
        steps += 1
        obs, state = result.observation, result.model_state
        if result.terminated or result.failed or result.truncated:
            return total, steps, result.terminated, result.failed
        if step_budget is not None and steps >= step_budget:
            return total, steps, False, False


def pets_train(
    env_factory,
    config: PetsConfig,
    planner_config: CemConfig | MppiConfig,
    seed: int,
) -> tuple[Ensemble, list[PetsLogRow]]:
    """Train an ensemble by alternating MPC rollouts and model refits."""
    env = env_factory()
    state_dim, action_dim = 6, 2
    ensemble = Ensemble(
        state_dim,
        action_dim,
        members=config.members,
        hidden=config.hidden,
        activation=config.activation,
        rng=rng_mod.stream(seed, "ensemble-init"),
    )
    buffer = TransitionBuffer(config.buffer_capacity, state_dim, action_dim)
    rows: list[PetsLogRow] = []
    env_steps = 0
    episode_index = 0

    def random_act_factory(ep: int):
        gen = rng_mod.stream(seed, "random-actions", ep)
        lo = np.array([-env.config.dy_max, -env.config.dtheta_max])
        hi = -lo

        def act(obs, state, goal):
            a = gen.uniform(lo, hi)
            return Action(dy=float(a[0]), dtheta=float(a[1]))

        return act

    for _ in range(config.initial_random_episodes):
        ep_seed = rng_mod.derive_seed(seed, "episode", episode_index)
        budget = config.total_env_steps - env_steps
        if budget <= 0:
            break
        ret, steps, success, failed = run_episode(
            env, random_act_factory(episode_index), buffer, ep_seed, step_budget=budget
        )
        env_steps += steps
        rows.append(PetsLogRow(0, env_steps, steps, ret, success, failed, ()))
        episode_index += 1

    iteration = 0
    while env_steps < config.total_env_steps:
        iteration += 1
        result = train_ensemble(
            ensemble,
            buffer,
            rng_mod.stream(seed, "train", iteration),
            epochs=config.train_epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            holdout_fraction=config.holdout_fraction,
            patience=config.patience,
        )
        nll = tuple(result.final_holdout())
        for _ in range(config.episodes_per_iteration):
            budget = config.total_env_steps - env_steps
            if budget <= 0:
                break
            controller = MpcController(
                ensemble,
                env.config,
                planner_config,
                rng_mod.stream(seed, "plan", episode_index),
                particles=config.particles,
            )

            def mpc_act(obs, state, goal, controller=controller):
                return controller.act(state, goal)

            ep_seed = rng_mod.derive_seed(seed, "episode", episode_index)
            ret, steps, success, failed = run_episode(
                env, mpc_act, buffer, ep_seed, step_budget=budget
            )
            env_steps += steps
            rows.append(PetsLogRow(iteration, env_steps, steps, ret, success, failed, nll))
            episode_index += 1
    return ensemble, rows
