"""Tracking evaluation over held-out trajectories.

Both methods emit a per-step inferred-parameter series per trajectory. RL
mode rolls the calibration environment forward with deterministic policy
actions; supervised mode predicts from each real state pair but is scored
through the same environment so costs are comparable. Metrics follow the
tracking-error view: per-trajectory time averages first, then aggregates
across trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import (CalibEnv, EnvConfig, action_to_params, params_to_action,
                  target_param_value)
from .errors import ConfigInvalid

PARAM_NAMES = {"q_max": ("q_max",), "r_o": ("r_o",),
               "joint": ("q_max", "r_o")}


class OracleAgent:
    """Test hook: always emits the action encoding the true parameters."""

    def __init__(self, env_config: EnvConfig):
        self.env_config = env_config
        self._action: np.ndarray | None = None

    def begin(self, trajectory) -> None:
        self._action = params_to_action(trajectory.params, self.env_config)

    def act(self, obs, deterministic: bool = True) -> np.ndarray:
        if self._action is None:
            raise ConfigInvalid("OracleAgent.begin() not called")
        return self._action


@dataclass
class TrackingRow:
    """One per-step record for the exported tracking CSV."""

    trajectory_id: int
    t: int
    param: str
    true_param: float
    inferred_param: float


@dataclass
class TrajectoryEval:
    """Per-trajectory time-averaged metrics; vectors align with the
    calibrated parameter components."""

    trajectory_id: int
    steps: int
    mean_abs_error: np.ndarray
    mean_rel_error: np.ndarray
    bias: np.ndarray            # mean signed error, inferred - true
    inferred_std: np.ndarray
    discounted_cost: float


@dataclass
class EvalReport:
    target: str
    mode: str                   # rl | supervised
    per_trajectory: list[TrajectoryEval] = field(default_factory=list)

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.target]

    def _agg(self, attr: str) -> np.ndarray:
        return np.mean([getattr(r, attr) for r in self.per_trajectory], axis=0)

    @property
    def mean_abs_error(self) -> np.ndarray:
        return self._agg("mean_abs_error")

    @property
    def mean_rel_error(self) -> np.ndarray:
        return self._agg("mean_rel_error")

    @property
    def bias(self) -> np.ndarray:
        return self._agg("bias")

    @property
    def inferred_std(self) -> np.ndarray:
        return self._agg("inferred_std")

    @property
    def mean_discounted_cost(self) -> float:
        return float(np.mean([r.discounted_cost for r in self.per_trajectory]))

    def summary_rows(self):
        """Aggregate metrics as (metric, param, value) rows."""
        rows = []
        for i, name in enumerate(self.param_names):
            rows.append(("mean_abs_error", name, float(self.mean_abs_error[i])))
            rows.append(("mean_rel_error", name, float(self.mean_rel_error[i])))
            rows.append(("bias", name, float(self.bias[i])))
            rows.append(("inferred_std", name, float(self.inferred_std[i])))
        rows.append(("mean_discounted_cost", "", self.mean_discounted_cost))
        return rows


def _supervised_inputs(traj, env_config: EnvConfig) -> np.ndarray:
    scales = env_config.state_scales()
    x = np.empty((len(traj), 15))
    x[:, 0:7] = traj.states[:-1] / scales
    x[:, 7:14] = traj.states[1:] / scales
    x[:, 14] = traj.loads.currents / env_config.load_scale
    return x


def evaluate_trajectory(action_fn, traj, env_config: EnvConfig,
                        gamma: float) -> tuple[TrajectoryEval, list[TrackingRow]]:
    """Roll one trajectory; action_fn(obs, t) -> action in [-1, 1]^m."""
    env = CalibEnv(env_config)
    obs = env.reset(traj)
    true_vals = target_param_value(traj.params, env_config.target)
    names = PARAM_NAMES[env_config.target]
    inferred = []
    discounted = 0.0
    g = 1.0
    rows = []
    done = False
    t = 0
    while not done:
        action = action_fn(obs, t)
        vals = target_param_value(action_to_params(action, env_config),
                                  env_config.target)
        inferred.append(vals)
        for name, tv, iv in zip(names, true_vals, vals):
            rows.append(TrackingRow(traj.trajectory_id, t, name,
                                    float(tv), float(iv)))
        obs, cost, done = env.step(action)
        discounted += g * cost
        g *= gamma
        t += 1
    inferred = np.array(inferred)
    err = inferred - true_vals
    result = TrajectoryEval(
        trajectory_id=traj.trajectory_id,
        steps=t,
        mean_abs_error=np.mean(np.abs(err), axis=0),
        mean_rel_error=np.mean(np.abs(err) / np.abs(true_vals), axis=0),
        bias=np.mean(err, axis=0),
        inferred_std=np.std(inferred, axis=0),
        discounted_cost=discounted,
    )
    return result, rows


def evaluate_rl(agent, trajectories, env_config: EnvConfig,
                gamma: float = 0.9):
    """Deterministic-policy tracking over a trajectory set.

    Returns (EvalReport, tracking rows). Accepts any agent exposing
    act(obs, deterministic=...), including OracleAgent.
    """
    env_config.validate()
    report = EvalReport(target=env_config.target, mode="rl")
    all_rows: list[TrackingRow] = []
    for traj in trajectories:
        if hasattr(agent, "begin"):
            agent.begin(traj)
        result, rows = evaluate_trajectory(
            lambda obs, t: agent.act(obs, deterministic=True),
            traj, env_config, gamma)
        report.per_trajectory.append(result)
        all_rows.extend(rows)
    return report, all_rows


def evaluate_supervised(regressor, trajectories, env_config: EnvConfig,
                        gamma: float = 0.9):
    """Per-state-pair prediction over a trajectory set, scored through the
    tracking environment for cost comparability."""
    env_config.validate()
    report = EvalReport(target=env_config.target, mode="supervised")
    all_rows: list[TrackingRow] = []
    for traj in trajectories:
        inputs = _supervised_inputs(traj, env_config)
        actions = np.atleast_2d(regressor.predict_action(inputs))
        result, rows = evaluate_trajectory(
            lambda obs, t: actions[t], traj, env_config, gamma)
        report.per_trajectory.append(result)
        all_rows.extend(rows)
    return report, all_rows
