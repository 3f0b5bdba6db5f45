import dataclasses
import json

import numpy as np
import pytest

from skg import dataio
from skg.config import load_config
from skg.errors import InputError
from skg.pipeline import (
    StageError,
    distill_pair,
    extract_stage,
    read_checks,
    reconcile_blocks,
    run_pipeline,
    simulate_powers,
)
from skg.quantize import quantize_powers
from skg.reconcile import check_values, construct_code
from skg.waveform import Node


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    cfg = load_config(overrides=["run.frames=300", "quant.levels=4"], env={})
    return cfg, run_pipeline(cfg, tmp_path_factory.mktemp("pipe"))


def test_every_artifact_is_written(run):
    _, result = run
    names = {p.name for p in result.out_dir.iterdir()}
    for node in ("alice", "bob", "eve"):
        assert {f"{node}.iqf", f"{node}.powers.csv", f"{node}.bits"} <= names
    assert {"alice.synd", "alice.chk", "bob.rec.bits", "eve.rec.bits", "reconcile.csv",
            "reconcile.json", "entropy.csv", "keys.json", "config.ini"} <= names


def test_keys_agree_and_manifest_hides_key(run):
    _, result = run
    assert result.alice_key.key == result.bob_key.key
    text = (result.out_dir / "keys.json").read_text()
    assert result.alice_key.key.hex() not in text
    entry = json.loads(text)["keys"][0]
    assert entry["fingerprint"] == result.alice_key.fingerprint
    assert entry["input_length"] == result.alice_key.input_bits.size
    assert entry["keys_agree"] is True


def test_calibration_frames_never_enter_the_key(run):
    _, result = run
    rec = result.reconciliation
    assert rec.calibration_frames == 30
    assert min(result.alice_key.frames_used) >= rec.calibration_frames


def test_file_stages_match_memory(run):
    cfg, result = run
    powers = simulate_powers(cfg.chirp, cfg.scenario, cfg.filterbank, cfg.run.frames)
    for node in Node:
        name = node.name.lower()
        bits = dataio.read_bits(result.out_dir / f"{name}.bits")
        # samples go to disk as complex64, so only a few cells may straddle a level edge
        assert np.mean(bits != quantize_powers(powers[node], cfg.quant)) < 0.01
    checks = read_checks(result.out_dir / "alice.chk")
    np.testing.assert_array_equal(checks, check_values(dataio.read_bits(result.out_dir / "alice.bits")))


def test_reconcile_uses_explicit_crossover():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, (100, 32)).astype(np.uint8)
    b = a ^ (rng.random(a.shape) < 0.02).astype(np.uint8)
    rec = reconcile_blocks(a, b, None, construct_code(32, 0.3), crossover=0.02)
    assert rec.calibration_frames == 0
    assert rec.crossover_bob == 0.02
    assert rec.eve_decoded is None
    with pytest.raises(InputError):
        reconcile_blocks(a, b[:, :16], None, construct_code(32, 0.3))


def test_distill_pair_skips_failed_frames():
    blocks = np.random.default_rng(1).integers(0, 2, (10, 64)).astype(np.uint8)
    success = np.ones(10, dtype=bool)
    success[1] = False
    a, b = distill_pair(blocks, blocks, success, 1.0, 0)
    assert a.frames_used == (0, 2, 3, 4) and a.key == b.key


def test_stage_errors_name_the_stage(tmp_path):
    cfg = load_config(overrides=["run.frames=20"], env={})
    cfg = dataclasses.replace(cfg, entropy=dataclasses.replace(cfg.entropy, train_fraction=1.0))
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, tmp_path)
    assert info.value.stage == "entropy"
    # the earlier stages' outputs remain for inspection
    assert (tmp_path / "alice.synd").exists()


def test_extract_rejects_mismatched_recording(tmp_path):
    cfg = load_config(overrides=["run.frames=2"], env={})
    from skg.pipeline import simulate_stage

    paths = simulate_stage(cfg, tmp_path)
    other = load_config(overrides=["chirp.bandwidth_hz=50e6"], env={})
    with pytest.raises(InputError):
        extract_stage(paths[Node.ALICE], other.filterbank, tmp_path / "x.csv")
