import json
import subprocess
import sys

import numpy as np
import pytest

from skg import challenge
from skg.cli import build_parser, main

SMALL = ["--set", "run.frames=120", "--set", "quant.levels=4"]


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in ("simulate", "extract", "quantize", "reconcile", "entropy", "distill",
                 "challenge", "eval", "run"):
        assert name in out


def test_subcommand_help_documents_flags(capsys):
    with pytest.raises(SystemExit):
        main(["distill", "--help"])
    out = capsys.readouterr().out
    for flag in ("--bits", "--reconcile", "--entropy", "--reveal", "--threads", "--config", "--set"):
        assert flag in out


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--out", "x", "--bogus"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main(["run", "--ou", "x"])  # abbreviations are not accepted


def test_config_error_exits_before_work(tmp_path, capsys):
    code = main(["run", "--out", str(tmp_path / "r"), "--set", "code.block_length=32"])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_stagewise_matches_run(tmp_path, capsys):
    d = tmp_path / "s"
    assert main(["simulate", "--out", str(d), *SMALL]) == 0
    for node in ("alice", "bob", "eve"):
        assert main(["extract", "--frames", str(d / f"{node}.iqf"),
                     "--out", str(d / f"{node}.powers.csv"), *SMALL]) == 0
        assert main(["quantize", "--powers", str(d / f"{node}.powers.csv"),
                     "--out", str(d / f"{node}.bits"), *SMALL]) == 0
    assert main(["reconcile", "--alice", str(d / "alice.bits"), "--bob", str(d / "bob.bits"),
                 "--eve", str(d / "eve.bits"), "--out", str(d), *SMALL]) == 0
    assert main(["entropy", "--alice", str(d / "alice.bits"), "--syndromes", str(d / "alice.synd"),
                 "--eve-powers", str(d / "eve.powers.csv"), "--out", str(d / "entropy.csv"),
                 *SMALL]) == 0
    for name, bits in (("a", "alice.bits"), ("b", "bob.rec.bits")):
        assert main(["distill", "--bits", str(d / bits), "--reconcile", str(d),
                     "--entropy", str(d / "entropy.csv"), "--out", str(d / f"{name}.json"),
                     "--reveal", *SMALL]) == 0
    key_a = json.loads((d / "a.json").read_text())["keys"][0]["key"]
    key_b = json.loads((d / "b.json").read_text())["keys"][0]["key"]
    assert key_a == key_b

    r = tmp_path / "r"
    assert main(["run", "--out", str(r), "--reveal", *SMALL]) == 0
    assert json.loads((r / "keys.json").read_text())["keys"][0]["key"] == key_a
    for name in ("alice.bits", "alice.synd", "bob.rec.bits", "entropy.csv", "reconcile.csv"):
        assert (d / name).read_bytes() == (r / name).read_bytes(), name


def test_seed_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("SKG_SEED", "1")
    main(["run", "--out", str(tmp_path / "a"), *SMALL])
    monkeypatch.setenv("SKG_SEED", "2")
    main(["run", "--out", str(tmp_path / "b"), *SMALL])
    assert (tmp_path / "a" / "alice.bits").read_bytes() != (tmp_path / "b" / "alice.bits").read_bytes()


def test_eval_command(tmp_path):
    out = tmp_path / "grid.csv"
    code = main(["eval", "--out", str(out), "--frames", "100", "--levels", "4",
                 "--rates", "0.5", "--eve-correlations", "0.9", "0.1", "--static",
                 "--threads", "2"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 4
    assert lines[0].startswith("scenario,dynamic")


def test_challenge_make_and_verify(tmp_path, capsys):
    rng = np.random.default_rng(0)
    (tmp_path / "eve.iqf").write_bytes(b"f")
    (tmp_path / "alice.synd").write_bytes(b"s")
    keys = [rng.bytes(32) for _ in range(20)]
    manifest = {
        "keys": [
            {"key": k.hex(), "scenario": "nlos-static", "eve_position": 1, "eve_correlation": 0.9,
             "start_index": 0, "input_length": 1000, "cme_per_bit": 0.1,
             "eve_frames": "eve.iqf", "syndromes": "alice.synd"}
            for k in keys
        ]
    }
    (tmp_path / "keys.json").write_text(json.dumps(manifest))
    out = tmp_path / "chal"
    assert main(["challenge", "make", "--keys", str(tmp_path / "keys.json"), "--out", str(out)]) == 0
    bundle = challenge.load_bundle(out / "bundle")
    recovered = challenge.decrypt(bundle, keys)
    (tmp_path / "sub.json").write_text(json.dumps({"3": recovered[2].hex(), "9": recovered[8].hex()}))
    capsys.readouterr()
    assert main(["challenge", "verify", "--bundle", str(out / "bundle"),
                 "--submission", str(tmp_path / "sub.json")]) == 0
    assert capsys.readouterr().out.strip() == "2/20 recovered (entries 3, 9)"
    (tmp_path / "bad.json").write_text("[]")
    assert main(["challenge", "verify", "--bundle", str(out / "bundle"),
                 "--submission", str(tmp_path / "bad.json")]) == 1


def test_challenge_keys_subset(tmp_path):
    code = main(["challenge", "keys", "--out", str(tmp_path), "--set", "run.frames=150",
                 "--only", "los-dynamic-2", "nlos-dynamic-4"])
    assert code == 0
    records = json.loads((tmp_path / "keys.json").read_text())["keys"]
    assert [r["eve_position"] for r in records] == [2, 4]
    assert all(r["keys_agree"] for r in records)
    assert records[0]["eve_frames"] == "los-dynamic-2/eve.iqf"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "skg.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout


def test_parser_builds_without_side_effects():
    assert build_parser().prog == "skg"
