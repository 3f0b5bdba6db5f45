import dataclasses

import pytest

from skg.config import PipelineConfig, dump_config, load_config
from skg.errors import ConfigurationError


def test_defaults_match_the_reference_setup():
    cfg = load_config(env={})
    assert cfg.filterbank.num_filters == 16
    assert cfg.quant.levels == 16
    assert cfg.code.rate == 0.3
    assert cfg.chirp.bandwidth_hz == 70e6
    assert cfg.block_length == 64
    assert cfg.segment_bits == 4


def test_ini_file_and_overrides(tmp_path):
    path = tmp_path / "skg.ini"
    path.write_text(
        "[scenario]\nsnr_db = 12\ndynamic = false\nnum_taps = 8\n"
        "[quant]\nlevels = 4\n[code]\nrate = 0.5\ncrossover = 0.05\n"
    )
    cfg = load_config(path, ["code.rate=0.7", "run.frames=10"], env={})
    assert cfg.scenario.snr_db == 12 and cfg.scenario.dynamic is False
    assert len(cfg.scenario.tap_power_profile) == 8
    assert cfg.quant.levels == 4 and cfg.block_length == 32
    assert cfg.code.rate == 0.7 and cfg.code.crossover == 0.05
    assert cfg.run.frames == 10


def test_seed_from_environment():
    assert load_config(env={"SKG_SEED": "42"}).scenario.rng_seed == 42
    cfg = load_config(overrides=["scenario.rng_seed=5"], env={"SKG_SEED": "9"})
    assert cfg.scenario.rng_seed == 9
    with pytest.raises(ConfigurationError):
        load_config(env={"SKG_SEED": "x"})


@pytest.mark.parametrize(
    "override",
    [
        "bogus.key=1",
        "quant.bogus=1",
        "quant.levels=five",
        "norate=1",
        "code.rate=1.5",
        "scenario.dynamic=maybe",
    ],
)
def test_bad_values_are_rejected(override):
    with pytest.raises(ConfigurationError):
        load_config(overrides=[override], env={})


def test_block_length_must_match():
    with pytest.raises(ConfigurationError, match="K \\* log2\\(Q\\)"):
        load_config(overrides=["code.block_length=32"], env={})
    with pytest.raises(ConfigurationError, match="power of two"):
        load_config(overrides=["filterbank.num_filters=12"], env={})


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/skg.ini", env={})


def test_dump_round_trip(tmp_path):
    cfg = load_config(
        overrides=["scenario.snr_db=inf", "quant.levels=4", "entropy.segment_bits=0"], env={}
    )
    path = tmp_path / "dump.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path, env={}) == cfg


def test_direct_construction_is_validated():
    with pytest.raises(ConfigurationError):
        dataclasses.replace(PipelineConfig(), output_dir="x", run=dataclasses.replace(
            PipelineConfig().run, frames=0))
