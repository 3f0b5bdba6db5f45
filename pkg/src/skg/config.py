"""Pipeline configuration: INI file with one section per stage, plus overrides.

Example::

    [chirp]
    bandwidth_hz = 70e6
    symbol_duration_s = 17.1875e-6
    sample_rate_hz = 140e6

    [scenario]
    num_taps = 32
    tap_decay = 8
    reciprocity_coeff = 0.999
    eve_correlation = 0.3
    snr_db = 20
    dynamic = true
    rng_seed = 7

    [quant]
    levels = 16

    [code]
    rate = 0.3

Unknown sections or keys are rejected. ``SKG_SEED`` in the environment
replaces ``scenario.rng_seed``.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .filterbank import FilterbankConfig
from .quantize import QuantConfig
from .waveform import ChannelScenario, ChirpConfig, exponential_profile

SEED_ENV = "SKG_SEED"


@dataclass(frozen=True)
class CodeSettings:
    rate: float = 0.3
    design_param: float = 0.1
    # None: estimate from the calibration frames
    crossover: float | None = None
    calibration_fraction: float = 0.1
    block_length: int | None = None


@dataclass(frozen=True)
class EntropySettings:
    method: str = "combined"
    # None: one segment per quantized subband; 0: the whole block as one symbol
    segment_bits: int | None = None
    observation: str = "powers"
    prior: str = "mcv"
    train_fraction: float = 0.75
    bins: int = 128
    syndrome_cap: bool = True
    margin: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class RunSettings:
    frames: int = 1000
    start_index: int = 0
    scenario_id: str = "default"
    chunk: int = 250


@dataclass(frozen=True)
class PipelineConfig:
    chirp: ChirpConfig = field(default_factory=ChirpConfig)
    scenario: ChannelScenario = field(
        default_factory=lambda: ChannelScenario(
            num_taps=32,
            tap_power_profile=exponential_profile(32, 8.0),
            reciprocity_coeff=0.999,
            eve_correlation=0.3,
            snr_db=20.0,
            dynamic=True,
            rng_seed=0,
        )
    )
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    quant: QuantConfig = field(default_factory=QuantConfig)
    code: CodeSettings = field(default_factory=CodeSettings)
    entropy: EntropySettings = field(default_factory=EntropySettings)
    run: RunSettings = field(default_factory=RunSettings)
    output_dir: str = "skg-out"

    def __post_init__(self):
        validate(self)

    @property
    def block_length(self) -> int:
        return self.filterbank.num_filters * self.quant.bits_per_measurement

    @property
    def segment_bits(self):
        bits = self.entropy.segment_bits
        if bits is None:
            return self.quant.bits_per_measurement
        return bits or None


def validate(cfg: PipelineConfig) -> None:
    fb, chirp = cfg.filterbank, cfg.chirp
    if (fb.bandwidth_hz, fb.sample_rate_hz) != (chirp.bandwidth_hz, chirp.sample_rate_hz):
        raise ConfigurationError(
            "filterbank bandwidth/sample rate must match the chirp "
            f"({fb.bandwidth_hz}/{fb.sample_rate_hz} vs {chirp.bandwidth_hz}/{chirp.sample_rate_hz})"
        )
    if fb.prototype_taps > chirp.samples_per_frame:
        raise ConfigurationError("prototype filter is longer than a frame")
    n = cfg.block_length
    if cfg.code.block_length is not None and cfg.code.block_length != n:
        raise ConfigurationError(
            f"code.block_length = {cfg.code.block_length} but K * log2(Q) = "
            f"{fb.num_filters} * {cfg.quant.bits_per_measurement} = {n}; "
            "set block_length to match or drop it"
        )
    if n & (n - 1):
        raise ConfigurationError(
            f"K * log2(Q) = {n} is not a power of two, as polar codes require; "
            "choose num_filters and levels accordingly (e.g. K=16 with Q=4 or 16)"
        )
    if not 0 < cfg.code.rate < 1:
        raise ConfigurationError(f"code.rate must lie in (0, 1), got {cfg.code.rate}")
    if not 0 <= cfg.code.calibration_fraction < 1:
        raise ConfigurationError("code.calibration_fraction must lie in [0, 1)")
    seg = cfg.segment_bits
    if seg is not None and n % seg:
        raise ConfigurationError(f"entropy.segment_bits = {seg} does not divide the block length {n}")
    if cfg.entropy.method not in ("frequentist", "nn", "combined"):
        raise ConfigurationError(f"unknown entropy.method {cfg.entropy.method!r}")
    if cfg.entropy.observation not in ("powers", "bits"):
        raise ConfigurationError(f"unknown entropy.observation {cfg.entropy.observation!r}")
    if not 0 <= cfg.entropy.margin < 1:
        raise ConfigurationError("entropy.margin must lie in [0, 1)")
    if cfg.run.frames < 1:
        raise ConfigurationError("run.frames must be positive")


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _parse_optional_int(text):
    return None if text.strip().lower() in ("", "auto", "none") else int(text)


def _parse_floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


_PARSERS = {
    "chirp": {"bandwidth_hz": float, "symbol_duration_s": float, "sample_rate_hz": float},
    "scenario": {
        "num_taps": int,
        "tap_decay": float,
        "tap_power_profile": _parse_floats,
        "reciprocity_coeff": float,
        "eve_correlation": float,
        "snr_db": float,
        "dynamic": _parse_bool,
        "rng_seed": int,
    },
    "filterbank": {"num_filters": int, "rolloff": float, "prototype_taps": int},
    "quant": {"levels": int, "domain": str},
    "code": {
        "rate": float,
        "design_param": float,
        "crossover": _parse_optional_float,
        "calibration_fraction": float,
        "block_length": _parse_optional_int,
    },
    "entropy": {
        "method": str,
        "segment_bits": _parse_optional_int,
        "observation": str,
        "prior": str,
        "train_fraction": float,
        "bins": int,
        "syndrome_cap": _parse_bool,
        "margin": float,
        "seed": int,
    },
    "run": {"frames": int, "start_index": int, "scenario_id": str, "chunk": int},
    "paths": {"output_dir": str},
}


def _collect(parser: configparser.ConfigParser, overrides):
    values: dict[str, dict] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            values.setdefault(section, {})[key] = raw
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        values.setdefault(section, {})[key.strip()] = raw.strip()
    parsed: dict[str, dict] = {}
    for section, items in values.items():
        if section not in _PARSERS:
            raise ConfigurationError(
                f"unknown config section [{section}]; expected one of {sorted(_PARSERS)}"
            )
        for key, raw in items.items():
            if key not in _PARSERS[section]:
                raise ConfigurationError(
                    f"unknown key {key!r} in [{section}]; expected one of {sorted(_PARSERS[section])}"
                )
            try:
                parsed.setdefault(section, {})[key] = _PARSERS[section][key](raw)
            except ValueError as exc:
                raise ConfigurationError(f"[{section}] {key} = {raw!r}: {exc}") from None
    return parsed


def build_config(parsed: dict, env=None) -> PipelineConfig:
    env = os.environ if env is None else env
    defaults = {
        f.name: f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        for f in dataclasses.fields(PipelineConfig)
    }

    chirp = dataclasses.replace(defaults["chirp"], **parsed.get("chirp", {}))

    scn_values = dict(parsed.get("scenario", {}))
    default_scn = defaults["scenario"]
    taps = scn_values.get("num_taps", default_scn.num_taps)
    decay = scn_values.pop("tap_decay", None)
    if "tap_power_profile" not in scn_values:
        if decay is not None or taps != default_scn.num_taps:
            scn_values["tap_power_profile"] = exponential_profile(taps, decay or 8.0)
    if SEED_ENV in env:
        try:
            scn_values["rng_seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV}={env[SEED_ENV]!r} is not an integer") from None
    scenario = dataclasses.replace(default_scn, **scn_values)

    fb = dataclasses.replace(
        defaults["filterbank"],
        bandwidth_hz=chirp.bandwidth_hz,
        sample_rate_hz=chirp.sample_rate_hz,
        **parsed.get("filterbank", {}),
    )
    quant = dataclasses.replace(defaults["quant"], **parsed.get("quant", {}))
    code = dataclasses.replace(defaults["code"], **parsed.get("code", {}))
    entropy = dataclasses.replace(defaults["entropy"], **parsed.get("entropy", {}))
    run = dataclasses.replace(defaults["run"], **parsed.get("run", {}))
    output_dir = parsed.get("paths", {}).get("output_dir", defaults["output_dir"])
    return PipelineConfig(chirp, scenario, fb, quant, code, entropy, run, output_dir)


def load_config(path=None, overrides=None, env=None) -> PipelineConfig:
    """Read an INI file (optional) and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        if not os.path.exists(path):
            raise ConfigurationError(f"config file {path} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    return build_config(_collect(parser, overrides), env)


def dump_config(cfg: PipelineConfig) -> str:
    """Render a config back to INI text (round-trips through :func:`load_config`)."""
    scn = cfg.scenario
    sections = {
        "chirp": dataclasses.asdict(cfg.chirp),
        "scenario": {
            "num_taps": scn.num_taps,
            "tap_power_profile": ", ".join(repr(p) for p in scn.tap_power_profile),
            "reciprocity_coeff": scn.reciprocity_coeff,
            "eve_correlation": scn.eve_correlation,
            "snr_db": scn.snr_db,
            "dynamic": scn.dynamic,
            "rng_seed": scn.rng_seed,
        },
        "filterbank": {
            "num_filters": cfg.filterbank.num_filters,
            "rolloff": cfg.filterbank.rolloff,
            "prototype_taps": cfg.filterbank.prototype_taps,
        },
        "quant": dataclasses.asdict(cfg.quant),
        "code": dataclasses.asdict(cfg.code),
        "entropy": dataclasses.asdict(cfg.entropy),
        "run": dataclasses.asdict(cfg.run),
        "paths": {"output_dir": cfg.output_dir},
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        for key, value in items.items():
            if value is None:
                value = "auto"
            elif isinstance(value, float) and math.isinf(value):
                value = "inf" if value > 0 else "-inf"
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
