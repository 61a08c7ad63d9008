"""Simulated-data factory.

Generates trajectory sets that sweep one degradation parameter at a time
under randomized piecewise-constant load profiles, with a deterministic
seeded train/test split. Every trajectory is reproducible from the master
seed and its index alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import battery
from .battery import (BatteryConfig, DegradationParams, LoadProfile,
                      Trajectory)
from .env import TARGETS, CalibRange
from .errors import ConfigInvalid, SimulationFailed


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one dataset; fully determines its contents."""

    target: str = "r_o"
    count: int = 5500
    ranges: CalibRange = field(default_factory=CalibRange)
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    segment_range: tuple[float, float] = (300.0, 900.0)  # s
    current_range: tuple[float, float] = (1.0, 3.0)      # A
    max_steps: int = 10800        # 3 h simulated cycle cap at dt = 1 s
    split_fraction: float = 0.7
    seed: int = 0

    def validate(self) -> "DatasetSpec":
        if self.target not in TARGETS:
            raise ConfigInvalid(f"dataset.target must be one of {TARGETS}")
        if self.count <= 0:
            raise ConfigInvalid("dataset.count must be > 0")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigInvalid("dataset.split_fraction must be in (0, 1)")
        lo, hi = self.segment_range
        if not 0.0 < lo <= hi:
            raise ConfigInvalid("dataset.segment_range must satisfy 0 < lo <= hi")
        lo, hi = self.current_range
        if not 0.0 < lo <= hi:
            raise ConfigInvalid("dataset.current_range must satisfy 0 < lo <= hi")
        if self.max_steps < 2:
            raise ConfigInvalid("dataset.max_steps must be >= 2")
        self.ranges.validate()
        self.battery.validate()
        return self


@dataclass
class Dataset:
    """Disjoint train/test trajectory sets plus the spec that made them."""

    spec: DatasetSpec
    train: list[Trajectory]
    test: list[Trajectory]

    @property
    def trajectories(self) -> list[Trajectory]:
        return self.train + self.test


def load_profile(segment_range, current_range, max_steps: int, dt: float,
                 rng: np.random.Generator) -> LoadProfile:
    """Piecewise-constant profile: segment durations and amplitudes drawn
    uniformly from their ranges, truncated at max_steps."""
    currents = np.empty(max_steps)
    n = 0
    while n < max_steps:
        seg = int(round(rng.uniform(*segment_range) / dt))
        seg = max(1, min(seg, max_steps - n))
        currents[n:n + seg] = rng.uniform(*current_range)
        n += seg
    return LoadProfile(currents, dt=dt)


def sample_params(spec: DatasetSpec, rng: np.random.Generator) -> DegradationParams:
    """Uniform draw of the target parameter; the other stays at its
    perfect-battery value (one-parameter-at-a-time variation). The joint
    target draws both."""
    q_max = battery.Q_MAX_REF
    r_o = battery.R_O_REF
    if spec.target in ("q_max", "joint"):
        q_max = float(rng.uniform(*spec.ranges.q_max))
    if spec.target in ("r_o", "joint"):
        r_o = float(rng.uniform(*spec.ranges.r_o))
    return DegradationParams(q_max=q_max, r_o=r_o)


def make_trajectory(spec: DatasetSpec, index: int) -> Trajectory:
    """Simulate trajectory `index` of the dataset. Pure function of
    (spec, index) via the per-trajectory seed sequence."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    params = sample_params(spec, rng)
    loads = load_profile(spec.segment_range, spec.current_range,
                         spec.max_steps, spec.battery.dt, rng)
    try:
        traj = battery.simulate(params, loads, spec.battery)
    except Exception as exc:
        raise SimulationFailed(f"trajectory {index} failed: {exc}",
                               seed=index) from exc
    traj.trajectory_id = index
    traj.seed = index
    return traj


def generate(spec: DatasetSpec, jobs: int = 1) -> Dataset:
    """Build the full dataset and split it by a seeded shuffle.

    Deterministic: the same spec yields bit-identical trajectories and the
    same split every time, regardless of jobs (trajectories are independent
    and collected in index order).
    """
    spec.validate()
    if jobs > 1:
        import functools
        import multiprocessing

        with multiprocessing.Pool(jobs) as pool:
            trajectories = pool.map(functools.partial(make_trajectory, spec),
                                    range(spec.count))
    else:
        trajectories = [make_trajectory(spec, i) for i in range(spec.count)]
    order = np.random.default_rng(
        np.random.SeedSequence([spec.seed, spec.count])).permutation(spec.count)
    n_train = int(round(spec.split_fraction * spec.count))
    train = [trajectories[i] for i in order[:n_train]]
    test = [trajectories[i] for i in order[n_train:]]
    return Dataset(spec=spec, train=train, test=test)
