"""Physical-layer secret key generation from reciprocal channel measurements.

Stages: chirp probing over a simulated multipath channel (:mod:`waveform`),
subband power extraction (:mod:`filterbank`), Gray-coded quantization
(:mod:`quantize`), polar-code Slepian-Wolf reconciliation (:mod:`reconcile`),
leakage estimation (:mod:`entropy`) and SHA-256 privacy amplification
(:mod:`amplify`).
"""

from .amplify import KeyMaterial, distill_key, key_rate, required_input_length
from .config import PipelineConfig, load_config
from .entropy import EntropyEstimate, conditional_min_entropy
from .errors import SKGError
from .filterbank import FilterbankConfig, build_filterbank, extract_powers
from .quantize import QuantConfig, quantize_powers
from .reconcile import PolarSWCode, construct_code, decode_blocks, make_syndromes
from .waveform import ChannelScenario, ChirpConfig, Node, generate_chirp, synthesize_block

__version__ = "0.1.0"

__all__ = [
    "ChannelScenario",
    "ChirpConfig",
    "EntropyEstimate",
    "FilterbankConfig",
    "KeyMaterial",
    "Node",
    "PipelineConfig",
    "PolarSWCode",
    "QuantConfig",
    "SKGError",
    "build_filterbank",
    "conditional_min_entropy",
    "construct_code",
    "decode_blocks",
    "distill_key",
    "extract_powers",
    "generate_chirp",
    "key_rate",
    "load_config",
    "make_syndromes",
    "quantize_powers",
    "required_input_length",
    "synthesize_block",
]
