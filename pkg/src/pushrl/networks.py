"""Multilayer perceptrons and the diagonal-Gaussian output head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 4.0

_ACTIVATIONS = {
    "tanh": (Tensor.tanh, np.tanh),
    "relu": (Tensor.relu, lambda x: np.maximum(x, 0.0)),
}


class Mlp:
    """Fully connected net: linear layers with an activation between them,
    linear output (optionally activated via final_activation)."""

    def __init__(
        self,
        dims,
        activation: str = "tanh",
        rng: np.random.Generator | None = None,
        final_activation: bool = False,
    ):
        dims = [int(d) for d in dims]
        if len(dims) < 3:
            raise ValueError(f"need at least one hidden layer, got dims {dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer sizes must be positive, got {dims}")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; options: {sorted(_ACTIVATIONS)}")
        if rng is None:
            raise ValueError("an explicit rng is required for reproducible init")
        self.dims = dims
        self.activation = activation
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for din, dout in zip(dims[:-1], dims[1:]):
            scale = np.sqrt(2.0 / din) if activation == "relu" else np.sqrt(1.0 / din)
            w = rng.standard_normal((din, dout)) * scale
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(np.zeros(dout), requires_grad=True))
        self.final_activation = final_activation

    def parameters(self) -> list[Tensor]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def _check_input(self, shape) -> None:
        if len(shape) != 2 or shape[1] != self.dims[0]:
            raise ValueError(
                f"expected input of shape (batch, {self.dims[0]}), got {tuple(shape)}"
            )

    def forward(self, x) -> Tensor:
        """Taped forward pass for training."""
        if not isinstance(x, Tensor):
            x = Tensor(x)
        self._check_input(x.data.shape)
        act, _ = _ACTIVATIONS[self.activation]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last or self.final_activation:
                h = act(h)
        return h

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward pass; same arithmetic as forward()."""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x.shape)
        _, act = _ACTIVATIONS[self.activation]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i < last or self.final_activation:
                h = act(h)
        return h


@dataclass
class GaussianHead:
    """Diagonal Gaussian over a D-dimensional target; log_var arrives clamped."""

    mean: Tensor
    log_var: Tensor


def gaussian_head(raw: Tensor) -> GaussianHead:
    """Split a (batch, 2D) net output into mean and clamped log-variance."""
    d2 = raw.data.shape[1]
    if d2 % 2 != 0:
        raise ValueError(f"head input must have an even feature dim, got {d2}")
    d = d2 // 2
    mean = raw[:, :d]
    log_var = raw[:, d:].clamp(LOG_VAR_MIN, LOG_VAR_MAX)
    return GaussianHead(mean=mean, log_var=log_var)


def gaussian_head_arrays(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tape-free twin of gaussian_head."""
    d = raw.shape[1] // 2
    return raw[:, :d], np.clip(raw[:, d:], LOG_VAR_MIN, LOG_VAR_MAX)


def gaussian_nll(head: GaussianHead, target) -> Tensor:
    """Mean over the batch of sum_d [(t - mu)^2 / var + log var]."""
    t = target if isinstance(target, Tensor) else Tensor(target)
    if t.data.shape != head.mean.data.shape:
        raise ValueError(
            f"target shape {t.data.shape} != mean shape {head.mean.data.shape}"
        )
    err = t - head.mean
    per_row = (err * err * (-head.log_var).exp()).sum(axis=1) + head.log_var.sum(axis=1)
    return per_row.mean()


def gaussian_nll_arrays(mean: np.ndarray, log_var: np.ndarray, target: np.ndarray) -> float:
    err = target - mean
    return float(np.mean(np.sum(err * err * np.exp(-log_var) + log_var, axis=1)))
