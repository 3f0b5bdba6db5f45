import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from skg.errors import ConfigurationError, InputError
from skg.filterbank import PowerVector
from skg.quantize import (
    BitBlock,
    QuantConfig,
    gray_bits,
    gray_code,
    level_indices,
    mismatch_probability,
    quantize_frame,
    quantize_powers,
)


@given(st.integers(0, 2**16 - 2))
def test_gray_neighbours_differ_in_one_bit(level):
    assert bin(int(gray_code(level) ^ gray_code(level + 1))).count("1") == 1


def test_gray_table():
    assert gray_code(np.arange(8)).tolist() == [0, 1, 3, 2, 6, 7, 5, 4]
    assert gray_bits(np.array([[2, 3]]), 2).tolist() == [[1, 1, 1, 0]]


def test_level_boundaries():
    cfg = QuantConfig(levels=4, domain="linear")
    levels = level_indices(np.array([[0.0, 0.24, 0.25, 0.5, 0.99, 1.0]]), cfg)
    assert levels.tolist() == [[0, 0, 1, 2, 3, 3]]


def test_constant_frame_maps_to_zero():
    cfg = QuantConfig(levels=16)
    assert level_indices(np.full((1, 16), 3.0), cfg).tolist() == [[0] * 16]


def test_decibel_domain():
    # powers 1, 10, 100 in dB are 0, 10, 20: evenly spaced
    cfg = QuantConfig(levels=4)
    assert level_indices(np.array([[1.0, 10.0, 100.0]]), cfg).tolist() == [[0, 2, 3]]
    with pytest.raises(InputError):
        level_indices(np.array([[0.0, 1.0]]), cfg)


@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 16)),
               elements=st.floats(1e-6, 1e6)),
    st.sampled_from([2, 4, 16]),
)
def test_quantizer_properties(powers, q):
    cfg = QuantConfig(levels=q)
    levels = level_indices(powers, cfg)
    assert levels.min() >= 0 and levels.max() <= q - 1
    bits = quantize_powers(powers, cfg)
    assert bits.shape == (powers.shape[0], powers.shape[1] * cfg.bits_per_measurement)
    assert set(np.unique(bits)) <= {0, 1}
    # scaling a frame by a constant leaves its levels unchanged in dB
    scaled = level_indices(powers * 7.0, cfg)
    assert np.mean(scaled == levels) > 0.9


def test_frame_wrapper_and_mismatch():
    cfg = QuantConfig(levels=16)
    p = PowerVector(1, 8, np.geomspace(1, 1e3, 16))
    block = quantize_frame(p, cfg)
    assert isinstance(block, BitBlock) and len(block) == 64 and block.frame_index == 8
    other = BitBlock(1, 8, block.bits ^ np.eye(64, dtype=np.uint8)[0])
    assert mismatch_probability([block], [other]) == pytest.approx(1 / 64)
    with pytest.raises(InputError):
        mismatch_probability(np.zeros((2, 4)), np.zeros((2, 5)))


@pytest.mark.parametrize("kwargs", [{"levels": 3}, {"levels": 1}, {"domain": "log"}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        QuantConfig(**kwargs)
