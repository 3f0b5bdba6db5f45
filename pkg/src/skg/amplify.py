"""Privacy amplification: size the hash input from the CME budget and hash it."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ExhaustionError, InputError, UnusableEntropyError

KEY_BITS = 256


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    scenario: str
    start_frame_index: int
    input_bits: np.ndarray
    cme_per_bit_effective: float
    key: bytes
    frames_used: tuple = ()

    @property
    def fingerprint(self) -> str:
        return self.key.hex()[:8]

    def __eq__(self, other):
        if not isinstance(other, KeyMaterial):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.input_bits, other.input_bits)


def required_input_length(cme_per_bit: float, key_bits: int = KEY_BITS) -> int:
    """Smallest input length whose CME budget covers ``key_bits``: ``ceil(256 / cme)``."""
    if not cme_per_bit > 0:
        raise UnusableEntropyError(f"CME per bit is {cme_per_bit}; no key can be distilled")
    if cme_per_bit > 1:
        raise InputError(f"CME per bit cannot exceed 1, got {cme_per_bit}")
    return math.ceil(key_bits / cme_per_bit)


def pack_bits(bits) -> bytes:
    """Injective byte encoding of a bit string.

    8-byte big-endian bit length, then the bits MSB-first, zero-padded to a
    byte boundary. The length prefix keeps ``[1]`` and ``[1, 0]`` distinct.
    """
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    return len(bits).to_bytes(8, "big") + np.packbits(bits, bitorder="big").tobytes()


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_bits(bits) -> bytes:
    return sha256(pack_bits(bits))


def distill_key(blocks, start_index: int, cme_effective: float, scenario: str = "") -> KeyMaterial:
    """Hash successive reconciled blocks from ``start_index`` into a 256-bit key.

    ``blocks`` holds only successfully reconciled frames, either as
    ``(frame_index, bits)`` pairs or objects with ``frame_index`` and ``bits``.
    Blocks are taken in frame order and the last one is truncated so the
    input is exactly :func:`required_input_length` bits long.
    """
    need = required_input_length(cme_effective)
    items = []
    for block in blocks:
        if hasattr(block, "bits"):
            items.append((int(block.frame_index), np.asarray(block.bits, dtype=np.uint8)))
        else:
            idx, bits = block
            items.append((int(idx), np.asarray(bits, dtype=np.uint8)))
    items.sort(key=lambda item: item[0])
    chosen, total = [], 0
    for idx, bits in items:
        if idx < start_index:
            continue
        if total >= need:
            break
        chosen.append((idx, bits))
        total += bits.size
    if total < need:
        raise ExhaustionError(
            f"{total} reconciled bits from frame {start_index} on, {need} required",
            shortfall_bits=need - total,
        )
    input_bits = np.concatenate([bits for _, bits in chosen])[:need]
    return KeyMaterial(
        scenario=scenario,
        start_frame_index=int(start_index),
        input_bits=input_bits,
        cme_per_bit_effective=float(cme_effective),
        key=hash_bits(input_bits),
        frames_used=tuple(idx for idx, _ in chosen),
    )


def key_rate(num_filters: int, levels: int, fer: float, cme_per_bit_hat: float) -> float:
    """Secret bits per frame: ``K * log2(Q) * (1 - FER) * H``, H already margin-reduced."""
    if not (0 <= fer <= 1 and 0 <= cme_per_bit_hat <= 1):
        raise InputError("FER and CME must lie in [0, 1]")
    return num_filters * math.log2(levels) * (1 - fer) * cme_per_bit_hat
