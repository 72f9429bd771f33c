"""Uniform agent interface over model-based, model-free, and scripted control.

An agent is anything with begin_episode(seed) and
act(observation, model_state, goal) -> Action.
"""

from __future__ import annotations

import numpy as np

from . import rng as rng_mod
from .ensemble import Ensemble
from .env import Action, EnvConfig, Goal, ModelState, PolicyObservation
from .planning import CemConfig, MpcController, MppiConfig


class MpcAgent:
    """Plans on a learned ensemble; fresh planner rng per episode."""

    def __init__(
        self,
        ensemble: Ensemble,
        env_config: EnvConfig,
        planner_config: CemConfig | MppiConfig,
        particles: int = 20,
    ):
        self.ensemble = ensemble
        self.env_config = env_config
        self.planner_config = planner_config
        self.particles = particles
        self._controller: MpcController | None = None

    def begin_episode(self, seed: int) -> None:
        self._controller = MpcController(
            self.ensemble,
            self.env_config,
            self.planner_config,
            rng_mod.stream(seed, "plan"),
            particles=self.particles,
        )

    def act(self, obs: PolicyObservation, state: ModelState, goal: Goal) -> Action:
        if self._controller is None:
            raise RuntimeError("call begin_episode() before act()")
        return self._controller.act(state, goal)


class PolicyAgent:
    """Deterministic evaluation of a trained squashed-Gaussian policy."""

    def __init__(self, policy, action_scale):
        self.policy = policy
        self.action_scale = np.asarray(action_scale, dtype=np.float64)

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, obs: PolicyObservation, state: ModelState, goal: Goal) -> Action:
        squashed = self.policy.act_deterministic(obs.as_array()[None])[0]
        dy, dth = self.action_scale * squashed
        return Action(dy=float(dy), dtheta=float(dth))


class RandomAgent:
    def __init__(self, env_config: EnvConfig):
        self.lo = np.array([-env_config.dy_max, -env_config.dtheta_max])
        self.hi = -self.lo
        self._rng = None

    def begin_episode(self, seed: int) -> None:
        self._rng = rng_mod.stream(seed, "random-agent")

    def act(self, obs, state, goal) -> Action:
        a = self._rng.uniform(self.lo, self.hi)
        return Action(dy=float(a[0]), dtheta=float(a[1]))


class StraightAgent:
    """Holds the current heading; a do-nothing reference controller."""

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, obs, state, goal) -> Action:
        return Action(dy=0.0, dtheta=0.0)
