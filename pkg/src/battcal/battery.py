"""Reduced-order lithium-ion discharge model with injectable degradation
parameters.

Two electrodes, each split into a surface and a bulk control volume.
Diffusion between the volumes is driven by the mole-fraction difference with
a capacity-independent exchange coefficient, so the capacity parameter shapes
the state evolution and not just the terminal voltage. The load current moves
charge from the negative surface to the positive surface. Equilibrium
potentials follow a Nernst form with a configurable steepness gain; the ohmic
drop and the two overpotentials relax first-order toward their instantaneous
values.

The hot loop lives in a compiled Cython kernel when available, with a pure
Python twin as fallback (see `BACKEND`). Set BATTCAL_PURE_PYTHON=1 to force
the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, InvalidParams, StateUnderflow

if os.environ.get("BATTCAL_PURE_PYTHON") == "1":
    from . import _pysim as _kernel
else:
    try:
        from . import _fastsim as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _pysim as _kernel

#: Active kernel backend, "cython" or "python".
BACKEND = _kernel.BACKEND

R_GAS = 8.314       # J/(mol K)
FARADAY = 96487.0   # C/mol

#: Unaged ("perfect battery") parameter values.
Q_MAX_REF = 7600.0
R_O_REF = 0.117215


@dataclass(frozen=True)
class DegradationParams:
    """The two calibration targets: capacity and ohmic resistance."""

    q_max: float  # total charge capacity (C); decreases with age
    r_o: float    # internal ohmic resistance (Ohm); increases with age

    def validate(self) -> "DegradationParams":
        if not (np.isfinite(self.q_max) and self.q_max > 0.0):
            raise InvalidParams(f"q_max must be positive and finite, got {self.q_max}")
        if not (np.isfinite(self.r_o) and self.r_o > 0.0):
            raise InvalidParams(f"r_o must be positive and finite, got {self.r_o}")
        return self


PERFECT_PARAMS = DegradationParams(q_max=Q_MAX_REF, r_o=R_O_REF)

#: Order of the seven state components in array form.
STATE_FIELDS = ("q_sp", "q_bp", "q_bn", "q_sn", "v_o", "v_eta_p", "v_eta_n")


@dataclass(frozen=True)
class BatteryState:
    """Seven-component internal state: four charge volumes plus three lagged
    voltage contributions."""

    q_sp: float
    q_bp: float
    q_bn: float
    q_sn: float
    v_o: float
    v_eta_p: float
    v_eta_n: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q_sp, self.q_bp, self.q_bn, self.q_sn,
                         self.v_o, self.v_eta_p, self.v_eta_n])

    @classmethod
    def from_array(cls, a) -> "BatteryState":
        return cls(*(float(x) for x in a))

    @property
    def total_charge(self) -> float:
        return self.q_sp + self.q_bp + self.q_bn + self.q_sn


@dataclass(frozen=True)
class BatteryConfig:
    """Model configuration. Defaults give multi-hour discharges at 1-3 A with
    the EOD knee comfortably above the mole-fraction clamp."""

    dt: float = 1.0            # integration step (s)
    v_eod: float = 3.0         # end-of-discharge cutoff (V)
    v_s: float = 0.5           # surface volume fraction
    t_diff: float = 3000.0     # diffusion time constant (s)
    tau_o: float = 10.0        # ohmic-lag time constant (s)
    tau_eta: float = 10.0      # overpotential-lag time constant (s)
    i0_p: float = 10.0         # positive-electrode exchange current (A)
    i0_n: float = 10.0         # negative-electrode exchange current (A)
    u0_p: float = 4.0          # positive reference potential (V)
    u0_n: float = 0.01         # negative reference potential (V)
    temperature: float = 292.0  # K
    x_n0: float = 0.85         # initial negative-electrode mole fraction
    nernst_gain: float = 3.0   # steepness of the equilibrium-potential knee

    def validate(self) -> "BatteryConfig":
        if self.dt <= 0.0:
            raise ConfigInvalid("battery.dt must be > 0")
        if not 0.0 < self.v_s < 1.0:
            raise ConfigInvalid("battery.v_s must be in (0, 1)")
        if not 0.0 < self.x_n0 < 1.0:
            raise ConfigInvalid("battery.x_n0 must be in (0, 1)")
        for name in ("t_diff", "tau_o", "tau_eta"):
            if getattr(self, name) <= 0.0:
                raise ConfigInvalid(f"battery.{name} must be > 0")
        if self.i0_p <= 0.0 or self.i0_n <= 0.0:
            raise ConfigInvalid("battery exchange currents must be > 0")
        return self

    @property
    def k_diff(self) -> float:
        # mole-fraction flux coefficient, C/s per unit fraction difference;
        # anchored at the perfect-battery capacity so the model's capacity
        # parameter does not cancel out of the diffusion dynamics
        return Q_MAX_REF / self.t_diff

    @property
    def nernst_coef(self) -> float:
        return self.nernst_gain * R_GAS * self.temperature / FARADAY

    @property
    def eta_coef(self) -> float:
        return 2.0 * R_GAS * self.temperature / FARADAY

    def kernel_args(self) -> tuple:
        """Scalar arguments shared by both simulation backends."""
        return (self.dt, self.v_s, self.k_diff, self.tau_o, self.tau_eta,
                self.i0_p, self.i0_n, self.u0_p, self.u0_n,
                self.nernst_coef, self.eta_coef)


@dataclass(frozen=True)
class LoadProfile:
    """Per-step current demands (A, discharge positive) paired with dt."""

    currents: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "currents",
                           np.ascontiguousarray(self.currents, dtype=np.float64))
        if self.dt <= 0.0:
            raise ConfigInvalid("load profile dt must be > 0")
        if self.currents.size and (not np.all(np.isfinite(self.currents))
                                   or np.any(self.currents < 0.0)):
            raise ConfigInvalid("load currents must be finite and >= 0")

    def __len__(self) -> int:
        return int(self.currents.shape[0])


@dataclass
class Trajectory:
    """One simulated discharge cycle.

    states has shape (T+1, 7) in STATE_FIELDS order (row 0 is the initial
    state), voltages has length T+1 and loads length T. Degradation
    parameters are constant over the whole cycle.
    """

    params: DegradationParams
    loads: LoadProfile
    states: np.ndarray
    voltages: np.ndarray
    eod_index: int | None = None
    trajectory_id: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.states.shape[0] != len(self.loads) + 1:
            raise ConfigInvalid("trajectory length mismatch: states vs loads")
        if self.voltages.shape[0] != self.states.shape[0]:
            raise ConfigInvalid("trajectory length mismatch: voltages vs states")

    def __len__(self) -> int:
        return int(len(self.loads))

    def state_at(self, t: int) -> BatteryState:
        return BatteryState.from_array(self.states[t])


def init_state(params: DegradationParams, config: BatteryConfig) -> BatteryState:
    """Initial equilibrated state: charge partitioned by electrode mole
    fraction, then split surface/bulk; all lagged voltages zero.

    The partition uses residual subtraction so the four volumes sum to
    q_max within 1e-9 relative (and exactly under the default surface
    split).
    """
    params.validate()
    q_n = config.x_n0 * params.q_max
    q_p = params.q_max - q_n
    q_sn = config.v_s * q_n
    q_bn = q_n - q_sn
    q_sp = config.v_s * q_p
    q_bp = q_p - q_sp
    return BatteryState(q_sp=q_sp, q_bp=q_bp, q_bn=q_bn, q_sn=q_sn,
                        v_o=0.0, v_eta_p=0.0, v_eta_n=0.0)


def open_circuit_voltage(state: BatteryState, params: DegradationParams,
                         config: BatteryConfig) -> float:
    """Terminal voltage with all lagged drops at zero."""
    return _kernel.open_circuit_voltage(state.q_sp, state.q_sn, params.q_max,
                                        config.v_s, config.u0_p, config.u0_n,
                                        config.nernst_coef)


def step(state: BatteryState, current: float, params: DegradationParams,
         config: BatteryConfig, clamp: bool = False):
    """One explicit-Euler step; returns (next_state, voltage).

    Raises StateUnderflow when a charge volume would go negative. With
    clamp=True the overdraw is transferred back along its path instead, so
    charge stays conserved and no error is raised.
    """
    params.validate()
    if current < 0.0:
        raise ConfigInvalid("discharge current must be >= 0")
    out = _kernel.step_kernel(state.q_sp, state.q_bp, state.q_bn, state.q_sn,
                              state.v_o, state.v_eta_p, state.v_eta_n,
                              float(current), params.q_max, params.r_o,
                              *config.kernel_args(), 1 if clamp else 0)
    if out[8]:
        raise StateUnderflow("surface charge depleted under this load")
    return BatteryState(*out[:7]), out[7]


def step_array(state7: np.ndarray, current: float, params: DegradationParams,
               config: BatteryConfig, clamp: bool = False):
    """Array-in/array-out variant of `step` for the tracking environment."""
    out = _kernel.step_kernel(state7[0], state7[1], state7[2], state7[3],
                              state7[4], state7[5], state7[6],
                              float(current), params.q_max, params.r_o,
                              *config.kernel_args(), 1 if clamp else 0)
    if out[8]:
        raise StateUnderflow("surface charge depleted under this load")
    return np.array(out[:7]), out[7]


def simulate(params: DegradationParams, loads: LoadProfile,
             config: BatteryConfig) -> Trajectory:
    """Simulate a full discharge cycle.

    Stops early, recording eod_index, at the first step whose voltage drops
    below config.v_eod or that would underflow a charge volume. Pure function
    of its inputs; identical inputs give bit-identical trajectories.
    """
    params.validate()
    config.validate()
    if len(loads) == 0:
        raise ConfigInvalid("load profile must be non-empty for simulation")

    n = len(loads)
    states = np.zeros((n + 1, 7))
    voltages = np.zeros(n + 1)
    states[0] = init_state(params, config).as_array()
    voltages[0] = _kernel.open_circuit_voltage(states[0, 0], states[0, 3],
                                               params.q_max, config.v_s,
                                               config.u0_p, config.u0_n,
                                               config.nernst_coef)
    last, eod = _kernel.simulate_into(loads.currents, states, voltages,
                                      params.q_max, params.r_o,
                                      *config.kernel_args(), config.v_eod)
    states = states[:last + 1]
    voltages = voltages[:last + 1]
    truncated = LoadProfile(loads.currents[:last], dt=loads.dt)
    return Trajectory(params=params, loads=truncated, states=states,
                      voltages=voltages, eod_index=last if eod else None)


def eod_time(trajectory: Trajectory, v_eod: float) -> float | None:
    """First time (s) the recorded voltage drops below v_eod, else None."""
    below = np.nonzero(trajectory.voltages < v_eod)[0]
    if below.size == 0:
        return None
    return float(below[0]) * trajectory.loads.dt
