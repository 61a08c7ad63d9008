"""Flat text run configuration.

Format: one `section.key = value` per line; `#` starts a comment; blank
lines ignored. Unknown keys are rejected. Every key has a documented
default (see DEFAULT_CONFIG_TEXT), so an empty file is a valid config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .baseline import SupervisedConfig
from .battery import BatteryConfig
from .datagen import DatasetSpec
from .env import CalibRange, EnvConfig
from .errors import ConfigInvalid
from .lac import LacConfig


def _bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _pair(s: str) -> tuple[float, float]:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers: {s!r}")
    return float(parts[0]), float(parts[1])


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in s.split(",") if p.strip())


# key -> (converter, default shown in docs, help text)
SCHEMA: dict[str, tuple] = {
    "run.target": (str, "r_o", "calibration target: q_max | r_o | joint"),
    "run.seed": (int, "0", "master seed for all randomness"),
    "battery.dt": (float, "1.0", "integration step (s)"),
    "battery.v_eod": (float, "3.0", "end-of-discharge cutoff (V)"),
    "battery.v_s": (float, "0.5", "surface volume fraction"),
    "battery.t_diff": (float, "3000.0", "diffusion time constant (s)"),
    "battery.tau_o": (float, "10.0", "ohmic-lag time constant (s)"),
    "battery.tau_eta": (float, "10.0", "overpotential-lag time constant (s)"),
    "battery.i0_p": (float, "10.0", "positive exchange current (A)"),
    "battery.i0_n": (float, "10.0", "negative exchange current (A)"),
    "battery.u0_p": (float, "4.0", "positive reference potential (V)"),
    "battery.u0_n": (float, "0.01", "negative reference potential (V)"),
    "battery.temperature": (float, "292.0", "cell temperature (K)"),
    "battery.x_n0": (float, "0.85", "initial negative mole fraction"),
    "battery.nernst_gain": (float, "3.0", "equilibrium-potential steepness"),
    "range.q_max": (_pair, "5000.0, 7600.0", "capacity calibration range (C)"),
    "range.r_o": (_pair, "0.117215, 0.30", "resistance calibration range (Ohm)"),
    "dataset.count": (int, "5500", "number of trajectories"),
    "dataset.segment_range": (_pair, "300.0, 900.0", "load segment length (s)"),
    "dataset.current_range": (_pair, "1.0, 3.0", "load current range (A)"),
    "dataset.max_steps": (int, "10800", "cycle length cap (steps)"),
    "dataset.split_fraction": (float, "0.7", "train fraction of the split"),
    "lac.gamma": (float, "0.9", "discount factor"),
    "lac.alpha3": (float, "0.1", "Lyapunov-decrease weight"),
    "lac.batch_size": (int, "256", "replay mini-batch size"),
    "lac.buffer_capacity": (int, "1000000", "replay buffer capacity"),
    "lac.total_steps": (int, "1000000", "environment steps to train"),
    "lac.tau_polyak": (float, "0.005", "target-critic smoothing"),
    "lac.steps_per_update": (int, "1", "env steps per gradient update"),
    "lac.warmup_steps": (int, "1000", "random-action steps before updates"),
    "lac.lr": (float, "0.0005", "Adam learning rate"),
    "lac.multiplier_lr": (float, "0.0005", "multiplier ascent rate"),
    "lac.multiplier_max": (float, "10.0", "multiplier clamp ceiling"),
    "lac.hidden": (_ints, "256, 256, 256", "hidden layer widths"),
    "lac.critic_out_scale": (float, "0.1", "critic last-layer init shrink"),
    "lac.dtype": (str, "float32", "training float precision"),
    "supervised.epochs": (int, "30", "training epochs"),
    "supervised.batch_size": (int, "256", "mini-batch size"),
    "supervised.lr": (float, "0.0005", "Adam learning rate"),
    "supervised.hidden": (_ints, "256, 256, 256", "hidden layer widths"),
    "supervised.dtype": (str, "float64", "training float precision"),
}

DEFAULT_CONFIG_TEXT = "\n".join(
    f"{key} = {default}  # {help_}" for key, (_, default, help_) in SCHEMA.items()
) + "\n"


def parse_config_text(text: str) -> dict:
    """Parse `section.key = value` lines against the schema."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            raise ConfigInvalid(f"line {lineno}: bad value for {key}: {exc}")
    return values


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one command invocation."""

    target: str = "r_o"
    seed: int = 0
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    ranges: CalibRange = field(default_factory=CalibRange)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    lac: LacConfig = field(default_factory=lambda: LacConfig(dtype="float32"))
    supervised: SupervisedConfig = field(default_factory=SupervisedConfig)

    def env_config(self) -> EnvConfig:
        return EnvConfig(target=self.target, ranges=self.ranges,
                         battery=self.battery)

    def validate(self) -> "RunConfig":
        self.env_config().validate()
        self.dataset.validate()
        self.lac.validate()
        self.supervised.validate()
        return self

    def content_hash(self) -> str:
        """Stable digest of every configuration field."""
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


def build_run_config(values: dict, seed_override: int | None = None,
                     desk: bool = False) -> RunConfig:
    """Assemble a RunConfig from parsed key/value pairs.

    The desk profile reduces the dataset to 500 trajectories and training to
    100k steps unless the config sets those keys explicitly.
    """
    def get(key, default):
        return values.get(key, default)

    target = get("run.target", "r_o")
    seed = get("run.seed", 0)
    if seed_override is not None:
        seed = seed_override

    bat = BatteryConfig(
        dt=get("battery.dt", 1.0),
        v_eod=get("battery.v_eod", 3.0),
        v_s=get("battery.v_s", 0.5),
        t_diff=get("battery.t_diff", 3000.0),
        tau_o=get("battery.tau_o", 10.0),
        tau_eta=get("battery.tau_eta", 10.0),
        i0_p=get("battery.i0_p", 10.0),
        i0_n=get("battery.i0_n", 10.0),
        u0_p=get("battery.u0_p", 4.0),
        u0_n=get("battery.u0_n", 0.01),
        temperature=get("battery.temperature", 292.0),
        x_n0=get("battery.x_n0", 0.85),
        nernst_gain=get("battery.nernst_gain", 3.0),
    )
    ranges = CalibRange(
        q_max=get("range.q_max", (5000.0, 7600.0)),
        r_o=get("range.r_o", (0.117215, 0.30)),
    )
    count = get("dataset.count", 500 if desk else 5500)
    total_steps = get("lac.total_steps", 100_000 if desk else 1_000_000)
    dataset = DatasetSpec(
        target=target,
        count=count,
        ranges=ranges,
        battery=bat,
        segment_range=get("dataset.segment_range", (300.0, 900.0)),
        current_range=get("dataset.current_range", (1.0, 3.0)),
        max_steps=get("dataset.max_steps", 10800),
        split_fraction=get("dataset.split_fraction", 0.7),
        seed=seed,
    )
    lac = LacConfig(
        gamma=get("lac.gamma", 0.9),
        alpha3=get("lac.alpha3", 0.1),
        batch_size=get("lac.batch_size", 256),
        buffer_capacity=get("lac.buffer_capacity", 1_000_000),
        total_steps=total_steps,
        tau_polyak=get("lac.tau_polyak", 5e-3),
        # desk profile halves the update rate to fit a desktop-CPU budget
        steps_per_update=get("lac.steps_per_update", 2 if desk else 1),
        warmup_steps=get("lac.warmup_steps", 1000),
        lr=get("lac.lr", 5e-4),
        multiplier_lr=get("lac.multiplier_lr", 5e-4),
        multiplier_max=get("lac.multiplier_max", 10.0),
        hidden=get("lac.hidden", (256, 256, 256)),
        critic_out_scale=get("lac.critic_out_scale", 0.1),
        dtype=get("lac.dtype", "float32"),
        seed=seed,
    )
    sup = SupervisedConfig(
        epochs=get("supervised.epochs", 30),
        batch_size=get("supervised.batch_size", 256),
        lr=get("supervised.lr", 5e-4),
        hidden=get("supervised.hidden", (256, 256, 256)),
        dtype=get("supervised.dtype", "float64"),
        seed=seed,
    )
    return RunConfig(target=target, seed=seed, battery=bat, ranges=ranges,
                     dataset=dataset, lac=lac, supervised=sup).validate()


def load_run_config(path: str | None, seed_override: int | None = None,
                    desk: bool = False) -> RunConfig:
    values = {}
    if path is not None:
        values = parse_config_text(Path(path).read_text())
    return build_run_config(values, seed_override=seed_override, desk=desk)
