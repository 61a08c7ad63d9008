"""Supervised direct-mapping baseline.

A regressor from the fully observed state triple [x_t, x_{t+1}, u_{t+1}]
(both states are real battery states) to the degradation parameters. The
comparator has the same network body as the policy, with one output per
parameter since no standard deviation head is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .battery import DegradationParams
from .env import OBS_DIM, EnvConfig, action_to_params, params_to_action
from .errors import ConfigInvalid, DimensionMismatch


@dataclass
class SupervisedConfig:
    epochs: int = 30
    batch_size: int = 256
    lr: float = 5e-4
    hidden: tuple[int, ...] = (256, 256, 256)
    dtype: str = "float64"
    seed: int = 0

    def validate(self) -> "SupervisedConfig":
        if self.epochs < 0:
            raise ConfigInvalid("supervised.epochs must be >= 0")
        if self.batch_size <= 0:
            raise ConfigInvalid("supervised.batch_size must be > 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigInvalid("supervised.dtype must be float32 or float64")
        return self


class Regressor:
    """MLP regressor whose clamped output maps affinely onto CalibRange."""

    def __init__(self, env_config: EnvConfig, config: SupervisedConfig):
        self.env_config = env_config.validate()
        self.config = config.validate()
        self.net = nn.Mlp([OBS_DIM, *config.hidden, env_config.action_dim],
                          dtype=np.dtype(config.dtype))

    def init(self, rng: np.random.Generator) -> "Regressor":
        self.net.init(rng)
        return self

    def predict_action(self, x: np.ndarray) -> np.ndarray:
        """Raw network output clamped to [-1, 1]; batch or single input."""
        return np.clip(self.net.forward(x), -1.0, 1.0)

    def predict(self, x: np.ndarray) -> DegradationParams:
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] != OBS_DIM:
            raise DimensionMismatch(f"predict expects one input of dim {OBS_DIM}")
        return action_to_params(self.predict_action(x), self.env_config)


def build_labeled_dataset(trajectories, env_config: EnvConfig):
    """One labeled sample per consecutive real-state pair.

    Inputs use the environment's normalization; labels are the true
    parameters mapped into [-1, 1]. Returns (inputs, labels) arrays.
    """
    env_config.validate()
    scales = env_config.state_scales()
    xs = []
    ys = []
    for traj in trajectories:
        t_len = len(traj)
        x = np.empty((t_len, OBS_DIM))
        x[:, 0:7] = traj.states[:-1] / scales
        x[:, 7:14] = traj.states[1:] / scales
        x[:, 14] = traj.loads.currents / env_config.load_scale
        xs.append(x)
        label = params_to_action(traj.params, env_config)
        ys.append(np.tile(label, (t_len, 1)))
    if not xs:
        return (np.empty((0, OBS_DIM)), np.empty((0, env_config.action_dim)))
    return np.concatenate(xs), np.concatenate(ys)


def train_supervised(inputs: np.ndarray, labels: np.ndarray,
                     env_config: EnvConfig, config: SupervisedConfig,
                     progress=None):
    """Minimize mean squared error with Adam over shuffled mini-batches.

    Returns (regressor, per-epoch mean training MSE). Deterministic given
    config.seed.
    """
    config.validate()
    if inputs.shape[0] == 0:
        raise ConfigInvalid("supervised training set must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    reg = Regressor(env_config, config).init(rng)
    dtype = reg.net.dtype
    inputs = np.asarray(inputs, dtype=dtype)
    labels = np.asarray(labels, dtype=dtype)
    opt = nn.Adam(reg.net.parameters(), lr=config.lr)
    n = inputs.shape[0]
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb, yb = inputs[idx], labels[idx]
            pred, cache = reg.net.forward_cache(xb)
            diff = pred - yb
            loss = float(np.mean(np.square(diff)))
            grads, _ = reg.net.backward(cache, 2.0 * diff / diff.size)
            opt.step(reg.net.parameters(), grads)
            total += loss * idx.size
        losses.append(total / n)
        if progress is not None:
            progress(epoch + 1, losses[-1])
    return reg, losses
