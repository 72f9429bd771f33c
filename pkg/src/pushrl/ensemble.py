"""Probabilistic ensemble dynamics model over ModelState transitions.

Each member is an MLP mapping normalized (state, action) to a diagonal
Gaussian over the normalized state delta. Angle dimensions of the state are
wrapped when forming deltas and when applying predictions, so the model never
sees a 2*pi jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .networks import (
    Mlp,
    gaussian_head,
    gaussian_head_arrays,
    gaussian_nll,
    gaussian_nll_arrays,
)
from .optim import Adam

TWO_PI = 2.0 * math.pi


def wrap_array(a: np.ndarray) -> np.ndarray:
    """Vectorized wrap to (-pi, pi]."""
    r = np.remainder(a, TWO_PI)
    return np.where(r > math.pi, r - TWO_PI, r)


class TransitionBuffer:
    """Ring buffer of (state, action, next_state)."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def add(self, state, action, next_state) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.next_states[i] = next_state
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self._size
        return self.states[:n], self.actions[:n], self.next_states[:n]


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def fit(self, x: np.ndarray) -> None:
        self.mean = x.mean(axis=0)
        self.std = np.maximum(x.std(axis=0), 1e-8)  # floor: constant dims stay finite

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean


class Ensemble:
    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        members: int = 5,
        hidden=(200, 200, 200, 200),
        activation: str = "relu",
        angle_dims=(2, 5),
        rng: np.random.Generator | None = None,
    ):
        if members < 1:
            raise ValueError(f"need at least one member, got {members}")
        if rng is None:
            raise ValueError("an explicit rng is required for reproducible init")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.angle_dims = tuple(angle_dims)
        if any(d < 0 or d >= state_dim for d in self.angle_dims):
            raise ValueError(f"angle_dims {angle_dims} out of range for state_dim {state_dim}")
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        dims = [state_dim + action_dim, *self.hidden, 2 * state_dim]
        self.members = [Mlp(dims, activation=activation, rng=rng) for _ in range(members)]
        self.in_norm = Normalizer.identity(state_dim + action_dim)
        self.out_norm = Normalizer.identity(state_dim)

    @property
    def n_members(self) -> int:
        return len(self.members)

    def delta(self, states: np.ndarray, next_states: np.ndarray) -> np.ndarray:
        d = next_states - states
        d[:, self.angle_dims] = wrap_array(d[:, self.angle_dims])
        return d

    def apply_delta(self, states: np.ndarray, deltas: np.ndarray) -> np.ndarray:
        nxt = states + deltas
        nxt[:, self.angle_dims] = wrap_array(nxt[:, self.angle_dims])
        return nxt

    def member_gaussian(
        self, index: int, states: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Raw-space (mean, log_var) of the delta distribution for one member."""
        x = self.in_norm.normalize(np.concatenate([states, actions], axis=1))
        mu_z, lv_z = gaussian_head_arrays(self.members[index].predict(x))
        mu = self.out_norm.denormalize(mu_z)
        lv = lv_z + 2.0 * np.log(self.out_norm.std)
        return mu, lv

    def predict(
        self,
        state: np.ndarray,
        action: np.ndarray,
        member_index: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Sample one next state from one member."""
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        a = np.asarray(action, dtype=np.float64).reshape(1, -1)
        mu, lv = self.member_gaussian(member_index, s, a)
        delta = mu + np.exp(0.5 * lv) * rng.standard_normal(mu.shape)
        return self.apply_delta(s, delta)[0]

    def predict_batch(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        member_indices: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Sampled next states with a (possibly different) member per row.

        One shared standard-normal draw per row keeps the rng stream layout
        independent of how rows are grouped by member.
        """
        n = states.shape[0]
        out = np.empty_like(states)
        eps = rng.standard_normal((n, self.state_dim))
        x = self.in_norm.normalize(np.concatenate([states, actions], axis=1))
        log_out_std2 = 2.0 * np.log(self.out_norm.std)
        for b in range(self.n_members):
            mask = member_indices == b
            if not mask.any():
                continue
            mu_z, lv_z = gaussian_head_arrays(self.members[b].predict(x[mask]))
            mu = self.out_norm.denormalize(mu_z)
            lv = lv_z + log_out_std2
            out[mask] = mu + np.exp(0.5 * lv) * eps[mask]
        return self.apply_delta(states, out)

    def holdout_nll(self, states, actions, next_states) -> list[float]:
        """Raw-space NLL of each member on the given transitions."""
        deltas = self.delta(states, next_states)
        scores = []
        for b in range(self.n_members):
            mu, lv = self.member_gaussian(b, states, actions)
            scores.append(gaussian_nll_arrays(mu, lv, deltas))
        return scores


@dataclass
class EnsembleTrainResult:
    train_nll: list  # per member: list of per-epoch raw-space NLL on train split
    holdout_nll: list  # per member: same on the shared holdout
    best_holdout: list = field(default_factory=list)

    def final_holdout(self) -> list[float]:
        return list(self.best_holdout)


def train_ensemble(
    ensemble: Ensemble,
    buffer: TransitionBuffer,
    rng: np.random.Generator,
    epochs: int = 50,
    batch_size: int = 256,
    learning_rate: float = 1e-3,
    holdout_fraction: float = 0.1,
    patience: int = 5,
) -> EnsembleTrainResult:
    """Fit every member on bootstrap resamples of the buffer.

    The holdout split is shared across members; each member early-stops on it
    and keeps its best weights.
    """
    states, actions, next_states = buffer.arrays()
    n = states.shape[0]
    if n < 10:
        raise ValueError(f"need at least 10 transitions to train, got {n}")
    n_hold = max(1, int(round(n * holdout_fraction)))
    if n_hold >= n:
        raise ValueError("holdout fraction leaves no training data")
    perm = rng.permutation(n)
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]

    ensemble.in_norm.fit(np.concatenate([states[train_idx], actions[train_idx]], axis=1))
    ensemble.out_norm.fit(ensemble.delta(states[train_idx], next_states[train_idx]))

    result = EnsembleTrainResult(train_nll=[], holdout_nll=[], best_holdout=[])
    for b, net in enumerate(ensemble.members):
        boot = train_idx[rng.integers(0, len(train_idx), size=len(train_idx))]
        xs = ensemble.in_norm.normalize(
            np.concatenate([states[boot], actions[boot]], axis=1)
        )
        ts = ensemble.out_norm.normalize(ensemble.delta(states[boot], next_states[boot]))
        opt = Adam(net.parameters(), lr=learning_rate)
        train_curve: list[float] = []
        hold_curve: list[float] = []
        best = math.inf
        best_weights = None
        since_best = 0
        for _ in range(epochs):
            order = rng.permutation(len(boot))
            for lo in range(0, len(order), batch_size):
                idx = order[lo : lo + batch_size]
                head = gaussian_head(net.forward(Tensor(xs[idx])))
                loss = gaussian_nll(head, ts[idx])
                opt.zero_grad()
                loss.backward()
                opt.step()
            mu, lv = ensemble.member_gaussian(b, states[boot], actions[boot])
            train_curve.append(
                gaussian_nll_arrays(mu, lv, ensemble.delta(states[boot], next_states[boot]))
            )
            mu, lv = ensemble.member_gaussian(b, states[hold_idx], actions[hold_idx])
            hold = gaussian_nll_arrays(
                mu, lv, ensemble.delta(states[hold_idx], next_states[hold_idx])
            )
            hold_curve.append(hold)
            if hold < best - 1e-12:
                best = hold
                best_weights = [p.data.copy() for p in net.parameters()]
                since_best = 0
            else:
                since_best += 1
                if since_best >= patience:
                    break
        if best_weights is not None:
            for p, w in zip(net.parameters(), best_weights):
                p.data[...] = w
        result.train_nll.append(train_curve)
        result.holdout_nll.append(hold_curve)
        result.best_holdout.append(best)
    return result


# -- checkpoint adapters -------------------------------------------------------


def ensemble_meta(ensemble: Ensemble) -> dict:
    return {
        "kind": "ensemble",
        "state_dim": ensemble.state_dim,
        "action_dim": ensemble.action_dim,
        "members": ensemble.n_members,
        "hidden": list(ensemble.hidden),
        "activation": ensemble.activation,
        "angle_dims": list(ensemble.angle_dims),
    }


def ensemble_arrays(ensemble: Ensemble) -> list[np.ndarray]:
    arrays = [
        ensemble.in_norm.mean,
        ensemble.in_norm.std,
        ensemble.out_norm.mean,
        ensemble.out_norm.std,
    ]
    for net in ensemble.members:
        for p in net.parameters():
            arrays.append(p.data)
    return arrays


def ensemble_from_checkpoint(meta: dict, arrays: list[np.ndarray], rng) -> Ensemble:
    if meta.get("kind") != "ensemble":
        raise ValueError(f"checkpoint is not an ensemble (kind={meta.get('kind')!r})")
    ens = Ensemble(
        state_dim=meta["state_dim"],
        action_dim=meta["action_dim"],
        members=meta["members"],
        hidden=tuple(meta["hidden"]),
        activation=meta["activation"],
        angle_dims=tuple(meta["angle_dims"]),
        rng=rng,
    )
    ens.in_norm = Normalizer(arrays[0].copy(), arrays[1].copy())
    ens.out_norm = Normalizer(arrays[2].copy(), arrays[3].copy())
    expect = 4 + sum(len(net.parameters()) for net in ens.members)
    if len(arrays) != expect:
        raise ValueError(f"checkpoint has {len(arrays)} arrays, expected {expect}")
    i = 4
    for net in ens.members:
        for p in net.parameters():
            if p.data.shape != arrays[i].shape:
                raise ValueError(
                    f"checkpoint array {i} has shape {arrays[i].shape}, expected {p.data.shape}"
                )
            p.data[...] = arrays[i]
            i += 1
    return ens
