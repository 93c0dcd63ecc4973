"""
Configuration for the neighbor-discovery experiments.

Defaults live here as module constants. A run can override them from a flat
`key = value` file (same dialect as a .env file, `#` comments allowed), from
NDISC_<SECTION>_<KEY> environment variables, and from CLI flags, in that order.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from dotenv import dotenv_values

from channel import ChannelModel
from errors import ConfigError, DiscoveryError
from gfield import FieldParams, field_new
from protocol import ProtocolConfig, ReceiverConfig

# Field / code configuration
FIELD_D = 521  # closest prime above 512 with 8 | D-1
CODE_N = 8
CODE_K = 1

# Receiver configuration
DETECT_GAMMA = 8.0  # tone must exceed gamma x symbol median
DECODE_DELTA_MAX = 3

# Protocol configuration
PROTOCOL_P = 0.5
PROTOCOL_T = 100
PROTOCOL_M = 256  # lowest-energy channels an acquiring node picks from
PROTOCOL_W = 50
PROTOCOL_C = 2
PROTOCOL_JAM_SLOTS = 8
PROTOCOL_ACQUIRE_WINDOW = 1
PROTOCOL_MAX_SLOTS = 2000

# Simulation configuration
SIM_SEED = 1
SIM_AREA = 1024.0
SIM_RANGE = 4.0
SWEEP_TRANSMITTERS = 30  # simultaneous transmitters in the SNR sweep

ENV_PREFIX = "NDISC_"

DEFAULTS: Dict[str, str] = {
    "field.d": str(FIELD_D),
    "code.n": str(CODE_N),
    "code.k": str(CODE_K),
    "decode.tau": "auto",
    "decode.delta_max": str(DECODE_DELTA_MAX),
    "detect.gamma": str(DETECT_GAMMA),
    "channel.kind": "rayleigh_block",
    "channel.noise_var": "0",
    "channel.pathloss_exp": "0",
    "channel.ref_gain": "1",
    "channel.tone_energy": "1",
    "channel.max_offset": "0",
    "protocol.p": str(PROTOCOL_P),
    "protocol.T": str(PROTOCOL_T),
    "protocol.M": str(PROTOCOL_M),
    "protocol.W": str(PROTOCOL_W),
    "protocol.C": str(PROTOCOL_C),
    "protocol.jam_margin": "auto",
    "protocol.jam_slots": str(PROTOCOL_JAM_SLOTS),
    "protocol.acquire_window": str(PROTOCOL_ACQUIRE_WINDOW),
    "protocol.check_stride": "auto",
    "protocol.max_slots": str(PROTOCOL_MAX_SLOTS),
    "baseline.p": "auto",
    "sim.seed": str(SIM_SEED),
    "sim.trials": "200",
    "sim.area": str(SIM_AREA),
    "sim.range": str(SIM_RANGE),
    "sim.workers": "1",
    "sweep.snr_db": "-30, -27, -24, -21, -18, -15, -12, -9, -6, -3, 0",
    "sweep.transmitters": str(SWEEP_TRANSMITTERS),
    "sweep.density": "0.04, 0.1, 0.2",
    "curve.L": "1, 2, 5, 10, 20",
    "curve.t": "1, 10, 50, 100",
    "curve.p": "0.1, 0.5",
}


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


@dataclass
class ExperimentConfig:
    """Resolved string-valued configuration with typed, validated accessors."""

    values: Dict[str, str] = field(default_factory=lambda: dict(DEFAULTS))
    source: Optional[str] = None

    def raw(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self.values[key].strip()

    def get_int(self, key: str) -> int:
        try:
            return int(self.raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.raw(key)!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.raw(key)!r}") from None

    def get_optional_float(self, key: str) -> Optional[float]:
        return None if self.raw(key).lower() == "auto" else self.get_float(key)

    def get_optional_int(self, key: str) -> Optional[int]:
        return None if self.raw(key).lower() == "auto" else self.get_int(key)

    def get_float_list(self, key: str) -> List[float]:
        text = self.raw(key)
        if not text:
            return []
        try:
            return [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"{key} must be a comma-separated list of numbers, got {text!r}") from None

    def get_int_list(self, key: str) -> List[int]:
        values = self.get_float_list(key)
        if any(v != int(v) for v in values):
            raise ConfigError(f"{key} must list integers, got {self.raw(key)!r}")
        return [int(v) for v in values]

    @property
    def seed(self) -> int:
        seed = self.get_int("sim.seed")
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"sim.seed must be an unsigned 64-bit integer, got {seed}")
        return seed

    @property
    def trials(self) -> int:
        trials = self.get_int("sim.trials")
        if trials < 1:
            raise ConfigError(f"sim.trials must be >= 1, got {trials}")
        return trials

    @property
    def k(self) -> int:
        return self.get_int("code.k")

    def field_params(self) -> FieldParams:
        return field_new(self.get_int("field.d"), self.get_int("code.n"))

    def channel_model(self, noise_var: Optional[float] = None) -> ChannelModel:
        return ChannelModel(
            kind=self.raw("channel.kind"),
            noise_var=self.get_float("channel.noise_var") if noise_var is None else noise_var,
            pathloss_exp=self.get_float("channel.pathloss_exp"),
            ref_gain=self.get_float("channel.ref_gain"),
        )

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(
            p=self.get_float("protocol.p"),
            T=self.get_int("protocol.T"),
            M=self.get_int("protocol.M"),
            W=self.get_int("protocol.W"),
            C=self.get_int("protocol.C"),
            jam_margin=self.get_optional_float("protocol.jam_margin"),
            jam_slots=self.get_int("protocol.jam_slots"),
            acquire_window=self.get_int("protocol.acquire_window"),
            check_stride=self.get_optional_int("protocol.check_stride"),
            max_slots=self.get_int("protocol.max_slots"),
        )

    def receiver_config(self, delta_max: Optional[int] = None) -> ReceiverConfig:
        return ReceiverConfig(
            gamma=self.get_float("detect.gamma"),
            tau=self.get_optional_int("decode.tau"),
            delta_max=self.get_int("decode.delta_max") if delta_max is None else delta_max,
            tone_energy=self.get_float("channel.tone_energy"),
        )

    def validate(self) -> "ExperimentConfig":
        """Check every key against the module preconditions before any trial runs."""
        try:
            params = self.field_params()
            k = self.k
            if not 1 <= k <= params.n - 1:
                raise ConfigError(f"code.k must lie in 1..{params.n - 1}, got {k}")
            receiver = self.receiver_config()
            if receiver.gamma <= 1:
                raise ConfigError(f"detect.gamma must be > 1, got {receiver.gamma}")
            if receiver.tau is not None and not k <= receiver.tau <= params.n:
                raise ConfigError(f"decode.tau must lie in {k}..{params.n}, got {receiver.tau}")
            if not 0 <= receiver.delta_max < params.d:
                raise ConfigError(f"decode.delta_max must lie in 0..{params.d - 1}")
            if receiver.tone_energy < 0:
                raise ConfigError("channel.tone_energy must be >= 0")
            self.channel_model()
            protocol = self.protocol_config()
            if protocol.M > params.d:
                raise ConfigError(f"protocol.M must be <= D={params.d}, got {protocol.M}")
            max_offset = self.get_int("channel.max_offset")
            if not 0 <= 2 * max_offset < params.d:
                raise ConfigError(f"channel.max_offset must lie in 0..{(params.d - 1) // 2}")
            baseline_p = self.get_optional_float("baseline.p")
            if baseline_p is not None and not 0 <= baseline_p <= 1:
                raise ConfigError(f"baseline.p must be in [0, 1] or auto, got {baseline_p}")
            for key in ("sim.area", "sim.range"):
                if self.get_float(key) <= 0:
                    raise ConfigError(f"{key} must be > 0")
            if self.get_int("sim.workers") < 1:
                raise ConfigError("sim.workers must be >= 1")
            transmitters = self.get_int("sweep.transmitters")
            if not 0 <= transmitters <= params.d ** k:
                raise ConfigError(f"sweep.transmitters must lie in 0..{params.d ** k}")
            if any(x < 0 for x in self.get_float_list("sweep.density")):
                raise ConfigError("sweep.density values must be >= 0")
            self.get_float_list("sweep.snr_db")
            if any(L < 1 for L in self.get_int_list("curve.L")) or any(t < 0 for t in self.get_int_list("curve.t")):
                raise ConfigError("curve.L values must be >= 1 and curve.t values >= 0")
            if any(not 0 <= p <= 1 for p in self.get_float_list("curve.p")):
                raise ConfigError("curve.p values must lie in [0, 1]")
            self.seed
            self.trials
        except ConfigError:
            raise
        except DiscoveryError as e:
            raise ConfigError(str(e)) from e
        return self

    def header(self) -> str:
        """One-line rendering of the resolved configuration for CSV headers."""
        return "# " + "; ".join(f"{key}={self.values[key].strip()}" for key in sorted(self.values))


def load_config(path: Optional[str] = None, overrides: Mapping[str, object] = None,
                environ: Mapping[str, str] = None) -> ExperimentConfig:
    """Defaults < config file < NDISC_* environment < explicit overrides."""
    values = dict(DEFAULTS)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        for key, value in dotenv_values(path).items():
            _set(values, key, value, path)
    environ = os.environ if environ is None else environ
    for key in DEFAULTS:
        if env_name(key) in environ:
            values[key] = environ[env_name(key)]
    for key, value in (overrides or {}).items():
        if value is not None:
            _set(values, key, str(value), "command line")
    return ExperimentConfig(values=values, source=path)


def _set(values: Dict[str, str], key: str, value: Optional[str], origin: str) -> None:
    key = key.strip()
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r} in {origin}")
    if value is None:
        raise ConfigError(f"configuration key {key!r} in {origin} has no value")
    values[key] = value
