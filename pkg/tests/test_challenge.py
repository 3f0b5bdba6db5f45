import json

import numpy as np
import pytest

from skg import challenge
from skg.errors import InputError, ParseError
from skg.pipeline import write_key_manifest


def _records(tmp_path, count=20, seed=0):
    rng = np.random.default_rng(seed)
    frames, synd = tmp_path / "eve.iqf", tmp_path / "alice.synd"
    frames.write_bytes(b"frames")
    synd.write_bytes(b"syndromes")
    return [
        {
            "key": rng.bytes(32),
            "scenario": "los-dynamic",
            "eve_position": i % 5 + 1,
            "eve_correlation": 0.5,
            "start_index": 100 + 20 * i,
            "input_length": 959,
            "cme_per_bit": 0.3,
            "eve_frames": frames,
            "syndromes": synd,
        }
        for i in range(count)
    ]


def test_zero_plaintext_yields_key(tmp_path):
    recs = _records(tmp_path)
    bundle = challenge.make_challenge(recs, [bytes(32)] * 20, tmp_path / "b")
    assert [e.ciphertext for e in bundle.entries] == [r["key"] for r in recs]


def test_round_trip_and_evidence_refs(tmp_path):
    recs = _records(tmp_path)
    plain = challenge.default_plaintexts()
    challenge.make_challenge(recs, plain, tmp_path / "b")
    bundle = challenge.load_bundle(tmp_path / "b")
    assert challenge.decrypt(bundle, [r["key"] for r in recs]) == plain
    entry = bundle.entries[0]
    assert entry.eve_frames["path"] == "../eve.iqf"
    assert len(entry.syndromes["sha256"]) == 64
    assert challenge.check_evidence(bundle, tmp_path / "b") == []
    (tmp_path / "eve.iqf").write_bytes(b"tampered")
    assert "../eve.iqf" in challenge.check_evidence(bundle, tmp_path / "b")


def test_shared_key_is_rejected(tmp_path):
    recs = _records(tmp_path)
    recs[5]["key"] = recs[2]["key"]
    with pytest.raises(InputError, match="distinct"):
        challenge.make_challenge(recs, challenge.default_plaintexts(), tmp_path / "b")


def test_counts_and_lengths(tmp_path):
    with pytest.raises(InputError):
        challenge.make_challenge(_records(tmp_path, 19), challenge.default_plaintexts()[:19], tmp_path)
    with pytest.raises(InputError):
        challenge.make_challenge(_records(tmp_path), [b"short"] * 20, tmp_path)


def _bundle(tmp_path):
    recs = _records(tmp_path)
    plain = challenge.default_plaintexts()
    return challenge.make_challenge(recs, plain, tmp_path / "b"), plain


def test_verify_partial_empty_full(tmp_path):
    bundle, plain = _bundle(tmp_path)
    report = challenge.verify_attempt(bundle, {7: plain[6]}, plain)
    assert report.recovered == 1 and report.matches[7] and not report.matches[8]
    assert report.summary() == "1/20 recovered (entries 7)"
    assert challenge.verify_attempt(bundle, {}, plain).recovered == 0
    everything = {i + 1: p for i, p in enumerate(plain)}
    assert challenge.verify_attempt(bundle, everything, plain).recovered == 20
    wrong = {3: bytes(32)}
    assert challenge.verify_attempt(bundle, wrong, plain).recovered == 0


@pytest.mark.parametrize(
    "text",
    ["not json", "[1, 2]", '{"x": "00"}', '{"21": "00"}', '{"1": 5}', '{"1": "zz"}', '{"1": "00"}'],
)
def test_malformed_submissions(text):
    with pytest.raises(ParseError):
        challenge.parse_submission(text)


def test_submission_parsing():
    claims = challenge.parse_submission(json.dumps({"7": "ab" * 32}))
    assert claims == {7: bytes([0xAB]) * 32}


def test_default_plaintexts_are_readable():
    blocks = challenge.default_plaintexts()
    assert len(blocks) == 20 and len(set(blocks)) == 20
    for b in blocks:
        assert len(b) == 32 and b.decode("ascii").isprintable()


def test_plaintext_file(tmp_path):
    challenge.write_plaintexts(tmp_path / "p.bin", challenge.default_plaintexts())
    assert challenge.read_plaintexts(tmp_path / "p.bin") == challenge.default_plaintexts()
    (tmp_path / "q.bin").write_bytes(b"x" * 100)
    with pytest.raises(InputError):
        challenge.read_plaintexts(tmp_path / "q.bin")


def test_twenty_scenarios():
    from skg.config import PipelineConfig

    combos = challenge.challenge_scenarios(PipelineConfig().scenario)
    assert len(combos) == 20
    assert len({(env, pos) for env, pos, _ in combos}) == 20
    assert {scn.dynamic for env, _, scn in combos if env.endswith("static")} == {False}
    assert [scn.eve_correlation for _, _, scn in combos[:5]] == [0.9, 0.7, 0.5, 0.3, 0.1]


def test_key_records_need_revealed_keys(tmp_path):
    write_key_manifest(tmp_path / "keys.json", [{"scenario": "s", "evidence": {}}])
    with pytest.raises(InputError, match="reveal"):
        challenge.load_key_records(tmp_path / "keys.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        challenge.load_key_records(tmp_path / "bad.json")


def test_bundle_holds_no_key_material(tmp_path):
    recs = _records(tmp_path)
    challenge.make_challenge(recs, challenge.default_plaintexts(), tmp_path / "b")
    data = (tmp_path / "b" / "manifest.json").read_bytes()
    for r in recs:
        assert r["key"] not in data and r["key"].hex().encode() not in data
