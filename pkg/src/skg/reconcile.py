"""Slepian-Wolf reconciliation with polar codes.

Alice maps her block ``x`` to ``u = x G`` with ``G = F^{(x)log2 n}``,
``F = [[1, 0], [1, 1]]`` (natural order, no bit reversal) and publishes the
coordinates of ``u`` on the ``m`` least reliable synthetic channels. Bob
treats his own block as the output of a BSC with Alice's block as input and
runs successive-cancellation decoding with those coordinates frozen to the
published values. Eve runs exactly the same decoder on her block.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

# Crossover probabilities are clamped into this range before forming LLRs.
MIN_CROSSOVER = 1e-6


@dataclass(frozen=True)
class PolarSWCode:
    block_length: int
    rate: float
    syndrome_length: int
    syndrome_positions: tuple[int, ...]
    design_param: float

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.block_length, dtype=bool)
        mask[list(self.syndrome_positions)] = True
        return mask


@dataclass(frozen=True, eq=False)
class Syndrome:
    frame_index: int
    bits: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Syndrome):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


def syndrome_length(n: int, rate: float) -> int:
    """``ceil((1 - r) n)`` clamped to ``[1, n]``.

    A small slack absorbs binary rounding, so a product that is an integer in
    exact arithmetic is not bumped up by one.
    """
    return min(n, max(1, math.ceil((1 - rate) * n - 1e-9)))


def bhattacharyya(n: int, crossover: float) -> np.ndarray:
    """Bhattacharyya parameters of the n synthetic channels of a BSC, natural order.

    Bits of the channel index are read MSB first; each selects the degraded
    (``2z - z^2``, bit 0) or upgraded (``z^2``, bit 1) channel of one
    polarization stage, matching the recursion of the SC decoder.
    """
    z = np.array([2.0 * math.sqrt(crossover * (1.0 - crossover))])
    while z.size < n:
        children = np.empty(2 * z.size)
        children[0::2] = 2 * z - z**2
        children[1::2] = z**2
        z = children
    return z


def construct_code(n: int, rate: float, design_param: float = 0.1) -> PolarSWCode:
    """Build a code whose syndrome covers the ``ceil((1-r)n)`` least reliable channels."""
    if int(n) != n or n < 2 or (int(n) & (int(n) - 1)):
        raise ConfigurationError(f"block length must be a power of two >= 2, got {n}")
    if not 0.0 < rate < 1.0:
        raise ConfigurationError(f"code rate must lie in (0, 1), got {rate}")
    if not 0.0 < design_param < 0.5:
        raise ConfigurationError(f"design crossover must lie in (0, 0.5), got {design_param}")
    n = int(n)
    m = syndrome_length(n, rate)
    z = bhattacharyya(n, design_param)
    # least reliable first; ties resolved towards lower indices
    order = np.lexsort((np.arange(n), -z))
    positions = tuple(sorted(int(i) for i in order[:m]))
    return PolarSWCode(n, float(rate), m, positions, float(design_param))


def polar_transform(bits) -> np.ndarray:
    """``u = x G`` over GF(2) for a batch ``(F, n)``; the transform is an involution."""
    x = np.array(np.atleast_2d(bits), dtype=np.uint8)
    frames, n = x.shape
    half = n // 2
    while half >= 1:
        view = x.reshape(frames, n // (2 * half), 2, half)
        view[:, :, 0, :] ^= view[:, :, 1, :]
        half //= 2
    return x


def make_syndromes(blocks, code: PolarSWCode) -> np.ndarray:
    blocks = np.atleast_2d(blocks)
    if blocks.shape[1] != code.block_length:
        raise InputError(f"block length {blocks.shape[1]} != code length {code.block_length}")
    return polar_transform(blocks)[:, list(code.syndrome_positions)]


def make_syndrome(block, code: PolarSWCode) -> Syndrome:
    bits = block.bits if hasattr(block, "bits") else np.asarray(block)
    return Syndrome(getattr(block, "frame_index", 0), make_syndromes(bits[None, :], code)[0])


def _check_node(a, b):
    # LLR of the XOR of two bits with LLRs a and b (exact box-plus)
    return (
        np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
        + np.log1p(np.exp(-np.abs(a + b)))
        - np.log1p(np.exp(-np.abs(a - b)))
    )


def _sc(llr, frozen, frozen_vals):
    """Recursive SC decoder; returns ``(u_hat, x_hat)`` for the given subtree."""
    n = llr.shape[1]
    if n == 1:
        if frozen[0]:
            u = frozen_vals[:, :1].copy()
        else:
            u = (llr < 0).astype(np.uint8)
        return u, u
    h = n // 2
    first, second = llr[:, :h], llr[:, h:]
    u_a, v_a = _sc(_check_node(first, second), frozen[:h], frozen_vals[:, :h])
    sign = 1.0 - 2.0 * v_a
    u_b, v_b = _sc(second + sign * first, frozen[h:], frozen_vals[:, h:])
    return np.concatenate([u_a, u_b], axis=1), np.concatenate([v_a ^ v_b, v_b], axis=1)


def channel_llr(observed, crossover: float) -> np.ndarray:
    p = min(max(float(crossover), MIN_CROSSOVER), 0.5)
    magnitude = math.log((1 - p) / p)
    return (1.0 - 2.0 * np.asarray(observed, dtype=float)) * magnitude


def decode_blocks(observed, syndromes, code: PolarSWCode, crossover: float) -> np.ndarray:
    """Batch syndrome-guided SC decoding; returns the decoded source blocks."""
    observed = np.atleast_2d(np.asarray(observed, dtype=np.uint8))
    syndromes = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
    if observed.shape[1] != code.block_length:
        raise InputError(f"observed length {observed.shape[1]} != {code.block_length}")
    if syndromes.shape != (observed.shape[0], code.syndrome_length):
        raise InputError(
            f"syndromes shaped {syndromes.shape}, expected "
            f"({observed.shape[0]}, {code.syndrome_length})"
        )
    if observed.shape[0] == 0:
        return observed.copy()
    frozen = code.frozen_mask
    frozen_vals = np.zeros(observed.shape, dtype=np.uint8)
    frozen_vals[:, frozen] = syndromes
    _, decoded = _sc(channel_llr(observed, crossover), frozen, frozen_vals)
    decoded = decoded.astype(np.uint8)
    assert np.array_equal(make_syndromes(decoded, code), syndromes), "syndrome inconsistency"
    return decoded


def sw_decode(observed, synd: Syndrome, code: PolarSWCode, crossover: float):
    """Decode one block; returns ``(decoded_bits, success_hint)``."""
    bits = observed.bits if hasattr(observed, "bits") else np.asarray(observed)
    decoded = decode_blocks(bits[None, :], synd.bits[None, :], code, crossover)[0]
    hint = bool(np.array_equal(make_syndromes(decoded[None, :], code)[0], synd.bits))
    return decoded, hint


def frame_error_rate(reference, decoded) -> float:
    """Fraction of frames where the decoded block differs from the reference anywhere."""
    reference, decoded = np.atleast_2d(reference), np.atleast_2d(decoded)
    if reference.shape[0] != decoded.shape[0]:
        raise InputError(f"{reference.shape[0]} reference frames vs {decoded.shape[0]} decoded")
    if reference.shape[0] == 0:
        raise InputError("no frames")
    return float(np.mean(np.any(reference != decoded, axis=1)))


def check_values(blocks) -> np.ndarray:
    """16-bit per-frame check value: the first two bytes of SHA-256 of the packed block."""
    blocks = np.atleast_2d(blocks)
    packed = np.packbits(blocks, axis=1)
    out = np.empty(blocks.shape[0], dtype=np.uint16)
    for i, row in enumerate(packed):
        digest = hashlib.sha256(row.tobytes()).digest()
        out[i] = int.from_bytes(digest[:2], "big")
    return out


def estimate_crossover(reference, observed, floor: float = 1e-3) -> float:
    """Empirical bit mismatch between two block sets, floored away from zero."""
    reference, observed = np.atleast_2d(reference), np.atleast_2d(observed)
    if reference.size == 0:
        return 0.5
    return float(min(0.5, max(floor, np.mean(reference != observed))))
