"""Baseband chirp probes and the three-node multipath channel simulator.

Alice and Bob exchange a linear complex chirp; every received observation is
the chirp convolved with a node-specific tap vector plus white Gaussian noise.
The legitimate pair shares a channel up to ``reciprocity_coeff`` and Eve's
channel is correlated with Bob's through ``eve_correlation``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Sub-streams of the per-scenario seed; kept disjoint so that channel and noise
# draws never share a generator state.
_STREAM_CHANNEL_STATIC = 11
_STREAM_CHANNEL_DYNAMIC = 12
_STREAM_NOISE = 13


class Node(enum.IntEnum):
    ALICE = 0
    BOB = 1
    EVE = 2


@dataclass(frozen=True)
class ChirpConfig:
    """Chirp probe parameters.

    Defaults reproduce the measurement campaign: 70 MHz sweep, 140 MHz
    complex sampling and a 17.1875 us symbol, i.e. 2406 samples per frame.
    """

    bandwidth_hz: float = 70e6
    symbol_duration_s: float = 17.1875e-6
    sample_rate_hz: float = 140e6

    def __post_init__(self):
        for name in ("bandwidth_hz", "symbol_duration_s", "sample_rate_hz"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be finite and positive, got {value}")
        if self.sample_rate_hz < self.bandwidth_hz:
            raise ConfigurationError(
                f"complex sampling needs sample_rate_hz >= bandwidth_hz "
                f"({self.sample_rate_hz} < {self.bandwidth_hz})"
            )
        if self.samples_per_frame < 1:
            raise ConfigurationError("symbol is shorter than one sample")

    @property
    def samples_per_frame(self) -> int:
        return int(round(self.symbol_duration_s * self.sample_rate_hz))

    @property
    def chirp_rate(self) -> float:
        return self.bandwidth_hz / self.symbol_duration_s


@dataclass(frozen=True)
class ChannelScenario:
    """Tapped-delay-line channel shared by Alice, Bob and Eve.

    ``tap_power_profile`` holds the linear power of each tap and must sum to
    one. With ``dynamic`` false the taps are drawn once per seed and only the
    noise changes from frame to frame.
    """

    num_taps: int = 8
    tap_power_profile: tuple[float, ...] = field(default=None)
    reciprocity_coeff: float = 1.0
    eve_correlation: float = 0.0
    snr_db: float = 20.0
    dynamic: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.num_taps) != self.num_taps or self.num_taps < 1:
            raise ConfigurationError(f"num_taps must be a positive integer, got {self.num_taps}")
        profile = self.tap_power_profile
        if profile is None:
            profile = exponential_profile(self.num_taps)
        profile = tuple(float(p) for p in profile)
        object.__setattr__(self, "tap_power_profile", profile)
        if len(profile) != self.num_taps:
            raise ConfigurationError(
                f"tap_power_profile has {len(profile)} entries, expected {self.num_taps}"
            )
        if any(p < 0 or not math.isfinite(p) for p in profile):
            raise ConfigurationError("tap powers must be finite and nonnegative")
        if abs(sum(profile) - 1.0) > 1e-9:
            raise ConfigurationError(f"tap powers must sum to 1, got {sum(profile)!r}")
        for name in ("reciprocity_coeff", "eve_correlation"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if math.isnan(self.snr_db):
            raise ConfigurationError("snr_db is NaN")
        if self.rng_seed < 0:
            raise ConfigurationError("rng_seed must be unsigned")


def exponential_profile(num_taps: int, decay_taps: float = 3.0) -> tuple[float, ...]:
    """Normalized exponential power-delay profile, ``exp(-t / decay_taps)``."""
    powers = np.exp(-np.arange(num_taps) / decay_taps)
    powers /= powers.sum()
    return tuple(powers.tolist())


@dataclass(frozen=True, eq=False)
class IQFrame:
    node: Node
    frame_index: int
    samples: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, IQFrame):
            return NotImplemented
        return (
            self.node == other.node
            and self.frame_index == other.frame_index
            and np.array_equal(self.samples, other.samples)
        )


def generate_chirp(cfg: ChirpConfig) -> np.ndarray:
    """Return ``x[n] = exp(j*pi*c*t_n**2) / T`` on a time axis centred at zero.

    The sweep therefore runs from ``-B/2`` to ``+B/2`` and is symmetric
    about DC.
    """
    n = np.arange(cfg.samples_per_frame)
    t = n / cfg.sample_rate_hz - cfg.symbol_duration_s / 2
    return np.exp(1j * np.pi * cfg.chirp_rate * t**2) / cfg.symbol_duration_s


def _complex_normal(rng, shape, power):
    draw = rng.standard_normal(shape + (2,))
    return (draw[..., 0] + 1j * draw[..., 1]) * np.sqrt(np.asarray(power) / 2)


def draw_channels(scn: ChannelScenario, frame_index: int):
    """Draw the tap vectors ``(h_A, h_B, h_E)`` for one frame.

    ``h_B = rho*h_A + sqrt(1-rho^2)*g_B`` and
    ``h_E = rho_E*h_B + sqrt(1-rho_E^2)*g_E`` with independent innovations,
    so every node sees the configured per-tap variance.
    """
    if frame_index < 0:
        raise ConfigurationError("frame_index must be nonnegative")
    if scn.dynamic:
        key = [scn.rng_seed, _STREAM_CHANNEL_DYNAMIC, frame_index]
    else:
        key = [scn.rng_seed, _STREAM_CHANNEL_STATIC]
    rng = np.random.default_rng(key)
    g = _complex_normal(rng, (3, scn.num_taps), scn.tap_power_profile)
    rho, rho_e = scn.reciprocity_coeff, scn.eve_correlation
    h_a = g[0]
    h_b = rho * h_a + math.sqrt(1 - rho**2) * g[1]
    h_e = rho_e * h_b + math.sqrt(1 - rho_e**2) * g[2]
    return h_a, h_b, h_e


def noise_variance(cfg: ChirpConfig, scn: ChannelScenario) -> float:
    """Noise variance per complex sample for the nominal received power.

    The nominal power is the chirp power times the total tap power (one), so
    the SNR holds on average over channel realizations.
    """
    if math.isinf(scn.snr_db) and scn.snr_db > 0:
        return 0.0
    signal_power = 1.0 / cfg.symbol_duration_s**2
    return signal_power / 10 ** (scn.snr_db / 10)


def _convolve_same(chirp: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # numpy "same" alignment: drop (L-1)//2 leading samples of the full output
    out = np.zeros(taps.shape[:-1] + chirp.shape, dtype=complex)
    n = chirp.shape[-1]
    offset = (taps.shape[-1] - 1) // 2
    for lag in range(taps.shape[-1]):
        shift = lag - offset
        if shift >= 0:
            out[..., shift:] += taps[..., lag, None] * chirp[: n - shift]
        else:
            out[..., : n + shift] += taps[..., lag, None] * chirp[-shift:]
    return out


def synthesize_block(cfg: ChirpConfig, scn: ChannelScenario, frame_indices) -> np.ndarray:
    """Received samples for many frames at once, shape ``(3, F, N)``.

    Axis 0 follows :class:`Node` order. Each frame depends only on
    ``(scn, frame_index)``, so blocks can be computed in any order or split.
    """
    frame_indices = [int(i) for i in frame_indices]
    chirp = generate_chirp(cfg)
    taps = np.empty((3, len(frame_indices), scn.num_taps), dtype=complex)
    if scn.dynamic:
        for j, idx in enumerate(frame_indices):
            taps[:, j] = draw_channels(scn, idx)
    elif frame_indices:
        taps[:] = np.stack(draw_channels(scn, 0))[:, None, :]
    out = _convolve_same(chirp, taps)
    sigma2 = noise_variance(cfg, scn)
    if sigma2 > 0:
        for j, idx in enumerate(frame_indices):
            rng = np.random.default_rng([scn.rng_seed, _STREAM_NOISE, idx])
            out[:, j] += _complex_normal(rng, (3, chirp.size), sigma2)
    return out


def synthesize_frame(cfg: ChirpConfig, scn: ChannelScenario, frame_index: int):
    """Return the ``(Alice, Bob, Eve)`` observations of one chirp exchange."""
    block = synthesize_block(cfg, scn, [frame_index])
    return tuple(IQFrame(node, frame_index, block[node, 0]) for node in Node)
