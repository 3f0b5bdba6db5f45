"""Per-frame multi-level quantization of subband powers into Gray codewords."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

DOMAINS = ("decibel", "linear")


@dataclass(frozen=True)
class QuantConfig:
    levels: int = 16
    domain: str = "decibel"

    def __post_init__(self):
        q = self.levels
        if int(q) != q or q < 2 or (int(q) & (int(q) - 1)):
            raise ConfigurationError(f"levels must be a power of two >= 2, got {q}")
        if self.domain not in DOMAINS:
            raise ConfigurationError(f"domain must be one of {DOMAINS}, got {self.domain!r}")

    @property
    def bits_per_measurement(self) -> int:
        return int(self.levels).bit_length() - 1


@dataclass(frozen=True, eq=False)
class BitBlock:
    node: int
    frame_index: int
    bits: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, BitBlock):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __len__(self):
        return len(self.bits)


def gray_code(level):
    """Binary-reflected Gray code of a level index."""
    level = np.asarray(level)
    return level ^ (level >> 1)


def gray_bits(levels, bits_per_level: int) -> np.ndarray:
    """Expand level indices ``(..., K)`` into MSB-first codewords ``(..., K * b)``."""
    codes = gray_code(np.asarray(levels, dtype=np.int64))
    shifts = np.arange(bits_per_level - 1, -1, -1)
    bits = (codes[..., None] >> shifts) & 1
    return bits.reshape(*codes.shape[:-1], -1).astype(np.uint8)


def level_indices(powers, cfg: QuantConfig) -> np.ndarray:
    """Level index of each power, using evenly spaced cells over the frame's range.

    Cells are half-open ``[edge_i, edge_{i+1})`` except the last, which also
    takes the frame maximum. A frame whose values are all equal maps to level 0.
    """
    powers = np.atleast_2d(np.asarray(powers, dtype=float))
    if powers.shape[-1] < 2:
        raise InputError("quantization needs at least two measurements per frame")
    if cfg.domain == "decibel":
        with np.errstate(divide="ignore", invalid="ignore"):
            values = 10 * np.log10(powers)
    else:
        values = powers
    if not np.all(np.isfinite(values)):
        raise InputError(f"non-finite values in the {cfg.domain} domain")
    lo = values.min(axis=-1, keepdims=True)
    hi = values.max(axis=-1, keepdims=True)
    span = hi - lo
    degenerate = span == 0
    scaled = (values - lo) / np.where(degenerate, 1.0, span)
    levels = np.floor(scaled * cfg.levels).astype(np.int64)
    levels = np.clip(levels, 0, cfg.levels - 1)
    return np.where(degenerate, 0, levels)


def quantize_powers(powers, cfg: QuantConfig) -> np.ndarray:
    """Quantize an ``(F, K)`` power array into ``(F, K * log2 Q)`` bits."""
    return gray_bits(level_indices(powers, cfg), cfg.bits_per_measurement)


def quantize_frame(p, cfg: QuantConfig) -> BitBlock:
    bits = quantize_powers(p.powers[None, :], cfg)[0]
    return BitBlock(p.node, p.frame_index, bits)


def _as_bit_array(blocks):
    if isinstance(blocks, np.ndarray):
        return np.atleast_2d(blocks)
    blocks = list(blocks)
    if not blocks:
        return np.zeros((0, 0), dtype=np.uint8)
    return np.stack([b.bits if isinstance(b, BitBlock) else np.asarray(b) for b in blocks])


def mismatch_probability(a, b) -> float:
    """Mean fraction of differing bits between two equally shaped block sequences."""
    a, b = _as_bit_array(a), _as_bit_array(b)
    if a.shape != b.shape:
        raise InputError(f"block sequences differ in shape: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InputError("no blocks to compare")
    return float(np.mean(a != b))
