"""Soft actor-critic with a squashed-Gaussian policy and twin critics.

Actions are learned in the squashed [-1, 1]^2 space and rescaled to the env
bounds at the boundary; critics and the replay buffer see squashed actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import rng as rng_mod
from .autodiff import Tensor, concat, minimum
from .env import Action, PushEnv
from .networks import Mlp
from .optim import Adam

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)
_LOG_2 = math.log(2.0)


@dataclass(frozen=True)
class SacConfig:
    hidden: tuple = (256, 256)
    activation: str = "relu"
    learning_rate: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    start_steps: int = 1000
    update_after: int = 1000
    updates_per_step: int = 1
    target_entropy: float | None = None  # default: -action_dim
    initial_alpha: float = 0.1
    eval_interval: int = 5000
    eval_episodes: int = 10

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need batch_size >= 1 and buffer_capacity >= batch_size")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, data: dict) -> "SacConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SacConfig fields: {sorted(unknown)}")
        return cls(**data)


def _tanh_log_jacobian_arrays(z: np.ndarray) -> np.ndarray:
    # log(1 - tanh(z)^2) = 2*(log 2 - z - softplus(-2z)), stable for large |z|
    return 2.0 * (_LOG_2 - z - np.logaddexp(0.0, -2.0 * z))


class PolicyNet:
    """Squashed diagonal Gaussian: one trunk, mean and log-std heads."""

    def __init__(self, obs_dim: int, action_dim: int, hidden, activation: str, rng):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.net = Mlp([obs_dim, *hidden, 2 * action_dim], activation=activation, rng=rng)

    def parameters(self):
        return self.net.parameters()

    def _arrays(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = self.net.predict(obs)
        mu = out[:, : self.action_dim]
        log_std = np.clip(out[:, self.action_dim :], LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def act_deterministic(self, obs: np.ndarray) -> np.ndarray:
        mu, _ = self._arrays(obs)
        return np.tanh(mu)

    def sample_arrays(
        self, obs: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Squashed actions and their log-probabilities (tape-free)."""
        mu, log_std = self._arrays(obs)
        eps = rng.standard_normal(mu.shape)
        z = mu + np.exp(log_std) * eps
        logp = (
            (-0.5 * eps * eps - log_std - 0.5 * _LOG_2PI).sum(axis=1, keepdims=True)
            - _tanh_log_jacobian_arrays(z).sum(axis=1, keepdims=True)
        )
        return np.tanh(z), logp

    def sample_taped(self, obs: np.ndarray, eps: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized sample with gradients, using the provided noise."""
        out = self.net.forward(Tensor(obs))
        mu = out[:, : self.action_dim]
        log_std = out[:, self.action_dim :].clamp(LOG_STD_MIN, LOG_STD_MAX)
        z = mu + log_std.exp() * eps
        action = z.tanh()
        gauss = (-0.5 * (eps * eps) - log_std - 0.5 * _LOG_2PI).sum(axis=1, keepdims=True)
        jac = ((_LOG_2 - z) * 2.0 - ((z * -2.0).softplus()) * 2.0).sum(axis=1, keepdims=True)
        return action, gauss - jac


class TwinCritic:
    def __init__(self, obs_dim: int, action_dim: int, hidden, activation: str, rng):
        dims = [obs_dim + action_dim, *hidden, 1]
        self.q1 = Mlp(dims, activation=activation, rng=rng)
        self.q2 = Mlp(dims, activation=activation, rng=rng)

    def parameters(self):
        return self.q1.parameters() + self.q2.parameters()

    def forward(self, obs_act: Tensor) -> tuple[Tensor, Tensor]:
        return self.q1.forward(obs_act), self.q2.forward(obs_act)

    def predict_min(self, obs_act: np.ndarray) -> np.ndarray:
        return np.minimum(self.q1.predict(obs_act), self.q2.predict(obs_act))

    def copy_weights_from(self, other: "TwinCritic") -> None:
        for p, q in zip(self.parameters(), other.parameters()):
            p.data[...] = q.data

    def soft_update_from(self, other: "TwinCritic", tau: float) -> None:
        for p, q in zip(self.parameters(), other.parameters()):
            p.data *= 1.0 - tau
            p.data += tau * q.data


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self._size = 0
        self._head = 0

    def __len__(self):
        return self._size

    def add(self, obs, action, reward, next_obs, done: bool) -> None:
        i = self._head
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        # Timeouts are not stored as terminal: bootstrapping continues there.
        self.dones[i] = float(done)
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self._size, size=batch_size)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }


class SacAgent:
    def __init__(self, obs_dim: int, action_dim: int, action_scale, config: SacConfig, rng):
        self.config = config
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_scale = np.asarray(action_scale, dtype=np.float64)
        self.policy = PolicyNet(obs_dim, action_dim, config.hidden, config.activation, rng)
        self.critic = TwinCritic(obs_dim, action_dim, config.hidden, config.activation, rng)
        self.target = TwinCritic(obs_dim, action_dim, config.hidden, config.activation, rng)
        self.target.copy_weights_from(self.critic)
        self.policy_opt = Adam(self.policy.parameters(), lr=config.learning_rate)
        self.critic_opt = Adam(self.critic.parameters(), lr=config.learning_rate)
        self.log_alpha = math.log(config.initial_alpha)
        self.target_entropy = (
            config.target_entropy if config.target_entropy is not None else -float(action_dim)
        )

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    def act(self, obs: np.ndarray, deterministic: bool = True, rng=None) -> Action:
        obs = np.asarray(obs, dtype=np.float64).reshape(1, -1)
        if deterministic:
            squashed = self.policy.act_deterministic(obs)[0]
        else:
            squashed, _ = self.policy.sample_arrays(obs, rng)
            squashed = squashed[0]
        dy, dth = self.action_scale * squashed
        return Action(dy=float(dy), dtheta=float(dth))

    def update(self, batch: dict, rng: np.random.Generator) -> dict:
        cfg = self.config
        obs, actions = batch["obs"], batch["actions"]
        rewards = batch["rewards"][:, None]
        next_obs, dones = batch["next_obs"], batch["dones"][:, None]

        # Critic targets (no tape needed).
        next_a, next_logp = self.policy.sample_arrays(next_obs, rng)
        target_q = self.target.predict_min(np.concatenate([next_obs, next_a], axis=1))
        y = rewards + cfg.gamma * (1.0 - dones) * (target_q - self.alpha * next_logp)

        q1, q2 = self.critic.forward(Tensor(np.concatenate([obs, actions], axis=1)))
        err1, err2 = q1 - y, q2 - y
        critic_loss = (err1 * err1).mean() + (err2 * err2).mean()
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        # Actor: fresh reparameterized actions through the updated critics.
        eps = rng.standard_normal((obs.shape[0], self.action_dim))
        a_t, logp_t = self.policy.sample_taped(obs, eps)
        q1_pi, q2_pi = self.critic.forward(concat([Tensor(obs), a_t], axis=1))
        actor_loss = (logp_t * self.alpha - minimum(q1_pi, q2_pi)).mean()
        self.policy_opt.zero_grad()
        actor_loss.backward()
        self.policy_opt.step()

        # Temperature: gradient step in log space toward the entropy target.
        mean_logp = float(logp_t.data.mean())
        self.log_alpha += cfg.learning_rate * (mean_logp + self.target_entropy)
        self.target.soft_update_from(self.critic, cfg.tau)

        return {
            "critic_loss": float(critic_loss.data),
            "actor_loss": float(actor_loss.data),
            "alpha": self.alpha,
            "mean_q": float(np.minimum(q1.data, q2.data).mean()),
            "entropy": -mean_logp,
        }


@dataclass
class SacLogRow:
    kind: str  # "train" or "eval"
    env_steps: int
    episode_return: float
    success_rate: float  # per-episode 0/1 for train rows, mean over eval episodes
    alpha: float
    critic_loss: float
    actor_loss: float

    CSV_HEADER = "kind,env_steps,episode_return,success_rate,alpha,critic_loss,actor_loss"

    def to_csv(self) -> str:
        return (
            f"{self.kind},{self.env_steps},{self.episode_return!r},{self.success_rate!r},"
            f"{self.alpha!r},{self.critic_loss!r},{self.actor_loss!r}"
        )


def evaluate_policy(
    env: PushEnv, agent: SacAgent, episodes: int, seed: int
) -> tuple[float, float]:
    returns, successes = [], 0
    for i in range(episodes):
        obs, _ = env.reset(seed=rng_mod.derive_seed(seed, "eval-episode", i))
        total = 0.0
        while True:
            res = env.step(agent.act(obs.as_array(), deterministic=True))
            total += res.reward
            obs = res.observation
            if res.terminated or res.failed or res.truncated:
                successes += res.terminated
                break
        returns.append(total)
    return float(np.mean(returns)), successes / episodes


def sac_train(
    env_factory,
    config: SacConfig,
    total_env_steps: int,
    seed: int,
) -> tuple[SacAgent, list[SacLogRow]]:
    env = env_factory()
    eval_env = env_factory()
    obs_dim, action_dim = 6, 2
    scale = np.array([env.config.dy_max, env.config.dtheta_max])
    agent = SacAgent(obs_dim, action_dim, scale, config, rng_mod.stream(seed, "sac-init"))
    buffer = ReplayBuffer(config.buffer_capacity, obs_dim, action_dim)
    rollout_rng = rng_mod.stream(seed, "rollout")
    update_rng = rng_mod.stream(seed, "updates")

    rows: list[SacLogRow] = []
    env_steps = 0
    episode_index = 0
    last = {"critic_loss": math.nan, "actor_loss": math.nan}
    next_eval = config.eval_interval

    while env_steps < total_env_steps:
        obs, _ = env.reset(seed=rng_mod.derive_seed(seed, "episode", episode_index))
        ep_return = 0.0
        ep_success = False
        while True:
            if env_steps < config.start_steps:
                squashed = rollout_rng.uniform(-1.0, 1.0, size=action_dim)
            else:
                squashed, _ = agent.policy.sample_arrays(
                    obs.as_array()[None], rollout_rng
                )
                squashed = squashed[0]
            action = Action(*(scale * squashed))
            res = env.step(action)
            done = res.terminated or res.failed
            buffer.add(obs.as_array(), squashed, res.reward, res.observation.as_array(), done)
            obs = res.observation
            ep_return += res.reward
            env_steps += 1

            if env_steps >= config.update_after and len(buffer) >= config.batch_size:
                for _ in range(config.updates_per_step):
                    last = agent.update(buffer.sample(config.batch_size, update_rng), update_rng)

            if env_steps >= next_eval:
                mean_ret, succ = evaluate_policy(
                    eval_env, agent, config.eval_episodes,
                    rng_mod.derive_seed(seed, "eval", next_eval),
                )
                rows.append(
                    SacLogRow("eval", env_steps, mean_ret, succ, agent.alpha,
                              last.get("critic_loss", math.nan), last.get("actor_loss", math.nan))
                )
                next_eval += config.eval_interval

            if done or res.truncated or env_steps >= total_env_steps:
                ep_success = res.terminated
                break
        rows.append(
            SacLogRow("train", env_steps, ep_return, float(ep_success), agent.alpha,
                      last.get("critic_loss", math.nan), last.get("actor_loss", math.nan))
        )
        episode_index += 1
    return agent, rows


# -- checkpoint adapters ---------------------------------------------------------


def policy_meta(agent: SacAgent) -> dict:
    return {
        "kind": "policy",
        "obs_dim": agent.obs_dim,
        "action_dim": agent.action_dim,
        "hidden": list(agent.config.hidden),
        "activation": agent.config.activation,
        "action_scale": list(agent.action_scale),
    }


def policy_arrays(agent: SacAgent) -> list[np.ndarray]:
    return [p.data for p in agent.policy.parameters()]


def policy_from_checkpoint(meta: dict, arrays: list[np.ndarray], rng) -> tuple[PolicyNet, np.ndarray]:
    if meta.get("kind") != "policy":
        raise ValueError(f"checkpoint is not a policy (kind={meta.get('kind')!r})")
    policy = PolicyNet(
        meta["obs_dim"], meta["action_dim"], tuple(meta["hidden"]), meta["activation"], rng
    )
    params = policy.parameters()
    if len(params) != len(arrays):
        raise ValueError(f"checkpoint has {len(arrays)} arrays, expected {len(params)}")
    for p, a in zip(params, arrays):
        if p.data.shape != a.shape:
            raise ValueError(f"checkpoint array shape {a.shape} != parameter {p.data.shape}")
        p.data[...] = a
    return policy, np.asarray(meta["action_scale"], dtype=np.float64)
