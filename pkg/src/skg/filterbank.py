"""Raised-cosine analysis filterbank and subband power extraction.

Filter ``k`` (1-based) is a real raised-cosine lowpass prototype of
bandwidth ``B/K`` shifted to ``f_k = -B(K - 2k + 1) / (2K)``, so the K
passbands tile ``[-B/2, B/2]`` symmetrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft, signal

from .errors import ConfigurationError, InputError


@dataclass(frozen=True)
class FilterbankConfig:
    num_filters: int = 16
    rolloff: float = 0.25
    prototype_taps: int = 129
    bandwidth_hz: float = 70e6
    sample_rate_hz: float = 140e6

    def __post_init__(self):
        if int(self.num_filters) != self.num_filters or self.num_filters < 2:
            raise ConfigurationError(f"need at least 2 filters, got {self.num_filters}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigurationError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if int(self.prototype_taps) != self.prototype_taps or self.prototype_taps < 1:
            raise ConfigurationError("prototype_taps must be a positive integer")
        if not (self.bandwidth_hz > 0 and self.sample_rate_hz >= self.bandwidth_hz):
            raise ConfigurationError("need 0 < bandwidth_hz <= sample_rate_hz")

    @property
    def subband_width_hz(self) -> float:
        return self.bandwidth_hz / self.num_filters


def center_frequencies(cfg: FilterbankConfig) -> np.ndarray:
    k = np.arange(1, cfg.num_filters + 1)
    K = cfg.num_filters
    return -cfg.bandwidth_hz * (K - 2 * k + 1) / (2 * K)


def raised_cosine_prototype(cfg: FilterbankConfig) -> np.ndarray:
    """Windowed raised-cosine lowpass with unit DC gain.

    The spectrum is flat up to ``(1 - beta) W / 2``, falls along a cosine to
    zero at ``(1 + beta) W / 2`` with ``W = B / K``; the impulse response is
    truncated to ``prototype_taps`` samples with a Hamming window.
    """
    beta = cfg.rolloff
    span = cfg.sample_rate_hz / cfg.subband_width_hz  # samples per 1/W
    t = (np.arange(cfg.prototype_taps) - (cfg.prototype_taps - 1) / 2) / span
    h = np.sinc(t)
    if beta > 0:
        denom = 1 - (2 * beta * t) ** 2
        singular = np.isclose(denom, 0.0)
        h = np.where(
            singular,
            (np.pi / 4) * np.sinc(1 / (2 * beta)),
            h * np.cos(np.pi * beta * t) / np.where(singular, 1.0, denom),
        )
    h = h * np.hamming(cfg.prototype_taps)
    return h / h.sum()


@dataclass(frozen=True, eq=False)
class Filterbank:
    config: FilterbankConfig
    centers_hz: np.ndarray
    prototype: np.ndarray
    responses: np.ndarray  # (K, taps) complex impulse responses

    @property
    def num_filters(self) -> int:
        return self.config.num_filters


def build_filterbank(cfg: FilterbankConfig) -> Filterbank:
    """Return the K modulated copies ``g(t) exp(j 2 pi f_k t)`` of the prototype.

    The modulation time axis is centred on the middle tap, which keeps every
    filter linear-phase and makes filter ``K+1-k`` the conjugate of filter ``k``.
    """
    proto = raised_cosine_prototype(cfg)
    centers = center_frequencies(cfg)
    t = (np.arange(cfg.prototype_taps) - (cfg.prototype_taps - 1) / 2) / cfg.sample_rate_hz
    responses = proto[None, :] * np.exp(2j * np.pi * centers[:, None] * t[None, :])
    return Filterbank(cfg, centers, proto, responses)


def extract_powers(samples, bank: Filterbank, chunk: int = 64) -> np.ndarray:
    """Time-averaged subband powers for a batch of frames.

    ``samples`` is ``(F, N)``; returns ``(F, K)`` with
    ``mean_n |(frame * g_k)[n]|**2`` over the "same"-mode convolution output.
    """
    samples = np.atleast_2d(np.asarray(samples))
    frames, n = samples.shape
    taps = bank.responses.shape[1]
    if n < taps:
        raise InputError(f"frame of {n} samples is shorter than the {taps}-tap filters")
    size = fft.next_fast_len(n + taps - 1)
    spectra = fft.fft(bank.responses, size)
    start = (taps - 1) // 2
    out = np.empty((frames, bank.num_filters))
    for lo in range(0, frames, chunk):
        block = fft.fft(samples[lo : lo + chunk].astype(complex), size)
        conv = fft.ifft(block[:, None, :] * spectra[None, :, :], axis=-1)
        same = conv[..., start : start + n]
        out[lo : lo + chunk] = np.mean(same.real**2 + same.imag**2, axis=-1)
    return out


@dataclass(frozen=True, eq=False)
class PowerVector:
    node: int
    frame_index: int
    powers: np.ndarray


def extract_power(frame, bank: Filterbank) -> PowerVector:
    """Single-frame version of :func:`extract_powers`."""
    powers = extract_powers(frame.samples[None, :], bank)[0]
    return PowerVector(frame.node, frame.frame_index, powers)


def frequency_response(bank: Filterbank, freqs_hz) -> np.ndarray:
    """Complex response of every filter at the given frequencies, ``(K, len(freqs))``."""
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    n = np.arange(bank.responses.shape[1])
    phase = np.exp(-2j * np.pi * np.outer(freqs_hz, n) / bank.config.sample_rate_hz)
    return bank.responses @ phase.T


def welch_psd(samples, sample_rate_hz: float, segment_len: int = 256, overlap: int | None = None):
    """Two-sided Welch PSD with a Hann window, frequencies ascending.

    ``samples`` may be one frame or an ``(F, N)`` batch, in which case the
    per-frame estimates are averaged. Returns ``(freqs_hz, psd)``.
    """
    samples = np.atleast_2d(np.asarray(samples))
    if overlap is None:
        overlap = segment_len // 2
    if not (0 < segment_len <= samples.shape[-1]) or not (0 <= overlap < segment_len):
        raise InputError(
            f"invalid segmentation: segment_len={segment_len}, overlap={overlap}, "
            f"frame length={samples.shape[-1]}"
        )
    freqs, psd = signal.welch(
        samples,
        fs=sample_rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=overlap,
        return_onesided=False,
        detrend=False,
        axis=-1,
    )
    psd = psd.mean(axis=0)
    order = np.argsort(freqs)
    return freqs[order], psd[order]
