"""Exception types shared across the package."""


class BattcalError(Exception):
    """Base class for all battcal errors."""


class InvalidParams(BattcalError):
    """Degradation parameters violate their invariants."""


class StateUnderflow(BattcalError):
    """A charge control volume would go negative (cell past EOD for this load)."""


class TrajectoryTooShort(BattcalError):
    """Trajectory has fewer than two states and cannot seed an episode."""


class EpisodeFinished(BattcalError):
    """env_step called after the episode is done."""


class DimensionMismatch(BattcalError):
    """Input dimension does not match the network layer."""


class ConfigInvalid(BattcalError):
    """A configuration value violates its invariants."""


class SimulationFailed(BattcalError):
    """Trajectory generation failed; carries the trajectory seed."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


class KindMismatch(BattcalError):
    """Checkpoint component kind does not match the requested mode."""


class SchemaMismatch(BattcalError):
    """File content does not match the expected schema or format version."""
