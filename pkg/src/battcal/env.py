"""Tracking MDP around the battery model.

Observations concatenate the predictor state, the true next state, and the
next load, all normalized to O(1). Actions live in [-1, 1]^m and map
affinely onto the degradation-parameter ranges. Cost is the Euclidean norm
of the normalized gap between the predicted and true next state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import battery
from .battery import (BatteryConfig, BatteryState, DegradationParams,
                      PERFECT_PARAMS, Trajectory)
from .errors import ConfigInvalid, EpisodeFinished, TrajectoryTooShort

#: Observation layout: [x_hat (7), x_next (7), u_next (1)].
OBS_DIM = 15

# Normalization scales are powers of two so encode/decode round-trips are
# exact: charges sit near the perfect capacity (7600 -> 8192), lagged
# voltages near 1 V, loads below the 4 A design maximum.
CHARGE_SCALE = 8192.0
VOLT_SCALE = 1.0
LOAD_SCALE = 4.0

TARGETS = ("q_max", "r_o", "joint")


@dataclass(frozen=True)
class CalibRange:
    """Per-parameter bounds for the action <-> parameter affine map."""

    q_max: tuple[float, float] = (5000.0, 7600.0)
    r_o: tuple[float, float] = (0.117215, 0.30)

    def validate(self) -> "CalibRange":
        for name in ("q_max", "r_o"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigInvalid(f"range.{name}: min must be < max")
        if not self.q_max[0] <= battery.Q_MAX_REF <= self.q_max[1]:
            raise ConfigInvalid("perfect q_max must lie inside its range")
        if not self.r_o[0] <= battery.R_O_REF <= self.r_o[1]:
            raise ConfigInvalid("perfect r_o must lie inside its range")
        return self

    def bounds(self, target: str) -> list[tuple[float, float]]:
        if target == "q_max":
            return [self.q_max]
        if target == "r_o":
            return [self.r_o]
        if target == "joint":
            return [self.q_max, self.r_o]
        raise ConfigInvalid(f"unknown calibration target {target!r}")


@dataclass(frozen=True)
class EnvConfig:
    """Tracking-environment configuration."""

    target: str = "r_o"
    ranges: CalibRange = field(default_factory=CalibRange)
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    frozen: DegradationParams = PERFECT_PARAMS
    charge_scale: float = CHARGE_SCALE
    volt_scale: float = VOLT_SCALE
    load_scale: float = LOAD_SCALE

    def validate(self) -> "EnvConfig":
        if self.target not in TARGETS:
            raise ConfigInvalid(f"env.target must be one of {TARGETS}")
        if min(self.charge_scale, self.volt_scale, self.load_scale) <= 0.0:
            raise ConfigInvalid("normalization scales must be > 0")
        self.ranges.validate()
        self.battery.validate()
        return self

    @property
    def action_dim(self) -> int:
        return 2 if self.target == "joint" else 1

    def state_scales(self) -> np.ndarray:
        return np.array([self.charge_scale] * 4 + [self.volt_scale] * 3)


def action_to_params(a, config: EnvConfig) -> DegradationParams:
    """Affine map from [-1, 1]^m to parameter space; non-calibrated
    components come from the frozen (perfect-battery) defaults."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != config.action_dim:
        raise ConfigInvalid(f"action must have dimension {config.action_dim}")
    bounds = config.ranges.bounds(config.target)
    vals = [lo + (float(x) + 1.0) / 2.0 * (hi - lo)
            for x, (lo, hi) in zip(a, bounds)]
    if config.target == "q_max":
        return DegradationParams(q_max=vals[0], r_o=config.frozen.r_o)
    if config.target == "r_o":
        return DegradationParams(q_max=config.frozen.q_max, r_o=vals[0])
    return DegradationParams(q_max=vals[0], r_o=vals[1])


def params_to_action(params: DegradationParams, config: EnvConfig) -> np.ndarray:
    """Inverse of action_to_params for the calibrated components, clipped to
    [-1, 1]."""
    bounds = config.ranges.bounds(config.target)
    if config.target == "q_max":
        vals = [params.q_max]
    elif config.target == "r_o":
        vals = [params.r_o]
    else:
        vals = [params.q_max, params.r_o]
    a = np.array([2.0 * (v - lo) / (hi - lo) - 1.0
                  for v, (lo, hi) in zip(vals, bounds)])
    return np.clip(a, -1.0, 1.0)


def target_param_value(params: DegradationParams, target: str) -> np.ndarray:
    if target == "q_max":
        return np.array([params.q_max])
    if target == "r_o":
        return np.array([params.r_o])
    return np.array([params.q_max, params.r_o])


def encode_observation(x_hat: np.ndarray, x_next: np.ndarray, u_next: float,
                       config: EnvConfig) -> np.ndarray:
    scales = config.state_scales()
    obs = np.empty(OBS_DIM)
    obs[0:7] = x_hat / scales
    obs[7:14] = x_next / scales
    obs[14] = u_next / config.load_scale
    return obs


def decode_observation(obs: np.ndarray, config: EnvConfig):
    """Round-trip inverse of encode_observation (exact: scales are powers
    of two). Returns (x_hat, x_next, u_next)."""
    scales = config.state_scales()
    x_hat = BatteryState.from_array(obs[0:7] * scales)
    x_next = BatteryState.from_array(obs[7:14] * scales)
    return x_hat, x_next, float(obs[14] * config.load_scale)


def discounted_cost(costs, gamma: float) -> float:
    """Sum of gamma^t * c_t over an episode."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigInvalid("gamma must be in [0, 1)")
    total = 0.0
    g = 1.0
    for c in costs:
        total += g * float(c)
        g *= gamma
    return total


class CalibEnv:
    """Single-owner mutable episode state over one source trajectory.

    At counter t the observation carries u_next = loads[t], the load about
    to be applied, which produces states[t+1].
    """

    def __init__(self, config: EnvConfig):
        self.config = config.validate()
        self._scales = config.state_scales()
        self._traj: Trajectory | None = None
        self._t = 0
        self._done = True
        self._x_hat: np.ndarray | None = None

    @property
    def done(self) -> bool:
        return self._done

    @property
    def t(self) -> int:
        return self._t

    @property
    def trajectory(self) -> Trajectory:
        if self._traj is None:
            raise EpisodeFinished("environment has not been reset")
        return self._traj

    def reset(self, trajectory: Trajectory) -> np.ndarray:
        """Start an episode: the predictor is initialized under
        perfect-battery parameters, mirroring deployment where the battery
        age is unknown."""
        if trajectory.states.shape[0] < 2:
            raise TrajectoryTooShort("trajectory needs at least 2 states")
        self._traj = trajectory
        self._t = 0
        self._done = False
        self._x_hat = battery.init_state(self.config.frozen,
                                         self.config.battery).as_array()
        return self._observe()

    def _observe(self) -> np.ndarray:
        t = self._t
        traj = self._traj
        if self._done:
            # terminal observation; never bootstrapped from
            return encode_observation(self._x_hat, traj.states[t], 0.0,
                                      self.config)
        return encode_observation(self._x_hat, traj.states[t + 1],
                                  traj.loads.currents[t], self.config)

    def step(self, action):
        """Apply one action; returns (obs, cost, done)."""
        if self._done or self._traj is None:
            raise EpisodeFinished("episode is finished; call reset()")
        traj = self._traj
        t = self._t
        params = action_to_params(action, self.config)
        u = float(traj.loads.currents[t])
        # clamp=True: a depleted predictor pins at zero charge instead of
        # aborting the episode
        self._x_hat, _ = battery.step_array(self._x_hat, u, params,
                                            self.config.battery, clamp=True)
        diff = (self._x_hat - traj.states[t + 1]) / self._scales
        cost = float(np.sqrt(np.dot(diff, diff)))
        self._t = t + 1
        self._done = self._t >= len(traj)
        return self._observe(), cost, self._done
