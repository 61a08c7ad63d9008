"""Real-time battery degradation-parameter calibration.

A reduced-order lithium-ion model, a tracking MDP around it, a
Lyapunov-based maximum-entropy actor-critic that infers the degradation
parameters online, and a supervised direct-mapping baseline.
"""

from .battery import (BACKEND, PERFECT_PARAMS, Q_MAX_REF, R_O_REF,
                      BatteryConfig, BatteryState, DegradationParams,
                      LoadProfile, Trajectory, init_state,
                      open_circuit_voltage, simulate, step)
from .env import (OBS_DIM, CalibEnv, CalibRange, EnvConfig, action_to_params,
                  params_to_action)
from .errors import BattcalError

__all__ = [
    "BACKEND", "PERFECT_PARAMS", "Q_MAX_REF", "R_O_REF",
    "BatteryConfig", "BatteryState", "DegradationParams", "LoadProfile",
    "Trajectory", "init_state", "open_circuit_voltage", "simulate", "step",
    "OBS_DIM", "CalibEnv", "CalibRange", "EnvConfig", "action_to_params",
    "params_to_action", "BattcalError",
]

__version__ = "0.1.0"
