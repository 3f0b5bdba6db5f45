import hashlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skg.amplify import (
    KeyMaterial,
    distill_key,
    hash_bits,
    key_rate,
    pack_bits,
    required_input_length,
)
from skg.errors import ExhaustionError, UnusableEntropyError


@pytest.mark.parametrize("cme, length", [(0.615, 417), (0.014, 18286), (1.0, 256), (0.015, 17067)])
def test_required_input_length(cme, length):
    assert required_input_length(cme) == length


@pytest.mark.parametrize("cme", [0.0, -0.1])
def test_unusable_entropy(cme):
    with pytest.raises(UnusableEntropyError):
        required_input_length(cme)


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_required_length_non_increasing(a, b):
    lo, hi = sorted((a, b))
    assert required_input_length(hi) <= required_input_length(lo)


def test_pack_bits_is_injective_across_lengths():
    assert pack_bits([1]) != pack_bits([1, 0])
    assert pack_bits([1, 0, 1]) == (3).to_bytes(8, "big") + bytes([0b10100000])
    assert hash_bits([]) == hashlib.sha256(bytes(8)).digest()


def _blocks(count, n=64, seed=0, start=0):
    rng = np.random.default_rng(seed)
    return [(start + i, rng.integers(0, 2, n).astype(np.uint8)) for i in range(count)]


def test_four_full_entropy_blocks_make_one_key():
    blocks = _blocks(6)
    key = distill_key(blocks, 0, 1.0, "s")
    np.testing.assert_array_equal(key.input_bits, np.concatenate([b for _, b in blocks[:4]]))
    assert key.frames_used == (0, 1, 2, 3)
    assert len(key.key) == 32
    assert key.key == hashlib.sha256(pack_bits(key.input_bits)).digest()
    assert key.fingerprint == key.key.hex()[:8]


def test_last_block_is_truncated_and_order_enforced():
    blocks = _blocks(10)
    key = distill_key(list(reversed(blocks)), 2, 0.6, "s")
    assert key.input_bits.size == required_input_length(0.6) == 427
    assert key.frames_used == (2, 3, 4, 5, 6, 7, 8)
    np.testing.assert_array_equal(key.input_bits[:64], blocks[2][1])


def test_start_index_changes_key():
    blocks = _blocks(20)
    assert distill_key(blocks, 0, 1.0).key != distill_key(blocks, 1, 1.0).key


def test_distillation_is_repeatable():
    blocks = _blocks(8)
    assert distill_key(blocks, 0, 0.5) == distill_key(blocks, 0, 0.5)
    assert isinstance(distill_key(blocks, 0, 0.5), KeyMaterial)


def test_exhaustion_reports_shortfall():
    with pytest.raises(ExhaustionError) as info:
        distill_key(_blocks(3), 0, 1.0)
    assert info.value.shortfall_bits == 256 - 192


def test_avalanche():
    bits = np.random.default_rng(3).integers(0, 2, 417).astype(np.uint8)
    digests = {hash_bits(bits)}
    for i in np.random.default_rng(4).choice(417, 100, replace=False):
        flipped = bits.copy()
        flipped[i] ^= 1
        digests.add(hash_bits(flipped))
    assert len(digests) == 101


def test_key_rate_examples():
    assert key_rate(16, 16, 0.0, 0.5535) == pytest.approx(35.424)
    assert key_rate(16, 16, 1.0, 0.5) == 0.0
    assert key_rate(16, 4, 0.2, 0.0) == 0.0
    assert key_rate(16, 4, 0.5, 0.5) == pytest.approx(8.0)
