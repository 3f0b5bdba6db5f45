"""One-time-pad security challenge over distilled keys.

Twenty keys (two environments, static or dynamic channel, five eavesdropper
placements) each encrypt a 256-bit plaintext. The public bundle holds the
ciphertexts plus everything Eve is entitled to: her received frames, the
syndromes, the start index and the CME estimate of every key. Plaintexts
stay with the organizer and are only used to score submissions.

Bundle manifest (``manifest.json``)::

    {
      "version": 1,
      "entries": [
        {
          "index": 1,                      # 1..20
          "scenario": "los-static",
          "eve_position": 1,               # 1 (closest) .. 5
          "eve_correlation": 0.9,
          "ciphertext": "<64 hex digits>",
          "start_frame_index": 100,
          "input_length": 18286,
          "cme_per_bit": 0.015,
          "eve_frames": {"path": "../keys/los-static-1/eve.iqf", "sha256": "..."},
          "syndromes": {"path": "../keys/los-static-1/alice.synd", "sha256": "..."}
        },
        ...
      ]
    }

Evidence paths are relative to the bundle directory.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .errors import ExhaustionError, FormatError, InputError, ParseError, UnusableEntropyError
from .evaluation import EVE_CORRELATION_SWEEP

NUM_ENTRIES = 20
BLOCK_BYTES = 32
BUNDLE_VERSION = 1

# Environment presets. The LoS presets see a stronger signal than the NLoS
# ones. In a static channel only the receiver noise is secret, so these SNRs
# are low enough for every static key to fit in about 10^3 frames.
ENVIRONMENTS = {
    "los-static": {"dynamic": False, "snr_db": 8.0},
    "los-dynamic": {"dynamic": True, "snr_db": 8.0},
    "nlos-static": {"dynamic": False, "snr_db": 5.0},
    "nlos-dynamic": {"dynamic": True, "snr_db": 5.0},
}


@dataclass(frozen=True)
class ChallengeEntry:
    index: int
    scenario: str
    eve_position: int
    eve_correlation: float
    ciphertext: bytes
    start_frame_index: int
    input_length: int
    cme_per_bit: float
    eve_frames: dict
    syndromes: dict

    def to_json(self) -> dict:
        data = dataclasses.asdict(self)
        data["ciphertext"] = self.ciphertext.hex()
        return data


@dataclass(frozen=True)
class ChallengeBundle:
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != NUM_ENTRIES:
            raise InputError(f"a bundle holds exactly {NUM_ENTRIES} entries, got {len(self.entries)}")
        for e in self.entries:
            if len(e.ciphertext) != BLOCK_BYTES:
                raise InputError(f"entry {e.index}: ciphertext is {len(e.ciphertext)} bytes")

    def to_json(self) -> dict:
        return {"version": BUNDLE_VERSION, "entries": [e.to_json() for e in self.entries]}


@dataclass(frozen=True)
class VerificationReport:
    matches: dict  # index -> bool, every entry

    @property
    def recovered(self) -> int:
        return sum(self.matches.values())

    def summary(self) -> str:
        hits = [str(i) for i, ok in sorted(self.matches.items()) if ok]
        return f"{self.recovered}/{len(self.matches)} recovered" + (
            f" (entries {', '.join(hits)})" if hits else ""
        )


def challenge_scenarios(base):
    """The 20 ``(scenario_id, eve_position, ChannelScenario)`` combinations."""
    out = []
    for env, overrides in ENVIRONMENTS.items():
        for pos, rho in enumerate(EVE_CORRELATION_SWEEP, start=1):
            scn = dataclasses.replace(base, eve_correlation=rho, **overrides)
            out.append((env, pos, scn))
    return out


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise InputError(f"cannot XOR {len(a)} bytes with {len(b)} bytes")
    return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()


_SENTENCES = (
    "The quick brown fox jumps over a lazy dog by the river bank.",
    "Reciprocal channels whisper the same secret to both ends.",
    "A one-time pad is perfect only when the pad is truly random.",
    "Meet me at the north gate when the clock strikes seven tonight.",
    "Every chirp sweeps seventy megahertz in seventeen microseconds.",
)


def default_plaintexts(seed: int = 0) -> list[bytes]:
    """Twenty human-readable 32-byte ASCII blocks."""
    rng = np.random.default_rng([seed, 31])
    blocks = []
    for i in range(NUM_ENTRIES):
        sentence = _SENTENCES[int(rng.integers(len(_SENTENCES)))]
        start = int(rng.integers(0, len(sentence) - 24))
        text = f"#{i + 1:02d} " + sentence[start:]
        blocks.append(text[:BLOCK_BYTES].ljust(BLOCK_BYTES, ".").encode("ascii"))
    return blocks


def read_plaintexts(path) -> list[bytes]:
    data = Path(path).read_bytes()
    if len(data) != NUM_ENTRIES * BLOCK_BYTES:
        raise InputError(
            f"{path}: expected {NUM_ENTRIES} x {BLOCK_BYTES} = {NUM_ENTRIES * BLOCK_BYTES} bytes, "
            f"got {len(data)}"
        )
    return [data[i : i + BLOCK_BYTES] for i in range(0, len(data), BLOCK_BYTES)]


def write_plaintexts(path, blocks) -> None:
    Path(path).write_bytes(b"".join(blocks))


def _evidence_ref(path, bundle_dir):
    path = Path(path)
    if not path.exists():
        raise InputError(f"evidence file {path} does not exist")
    return {"path": os.path.relpath(path, bundle_dir), "sha256": dataio.file_sha256(path)}


def make_challenge(keys, plaintexts, bundle_dir) -> ChallengeBundle:
    """Encrypt ``plaintexts`` under ``keys`` and write the public bundle.

    ``keys`` are key-manifest records (see :func:`load_key_records`) carrying
    the secret ``key`` bytes and absolute ``eve_frames``/``syndromes`` paths.
    Only ciphertexts and references to the evidence enter the bundle.
    """
    keys, plaintexts = list(keys), list(plaintexts)
    if len(keys) != NUM_ENTRIES or len(plaintexts) != NUM_ENTRIES:
        raise InputError(
            f"need exactly {NUM_ENTRIES} keys and {NUM_ENTRIES} plaintexts, "
            f"got {len(keys)} and {len(plaintexts)}"
        )
    secrets = [bytes(k["key"]) for k in keys]
    if any(len(s) != BLOCK_BYTES for s in secrets):
        raise InputError(f"every key must be {BLOCK_BYTES} bytes")
    if any(len(p) != BLOCK_BYTES for p in plaintexts):
        raise InputError(f"every plaintext must be {BLOCK_BYTES} bytes")
    if len(set(secrets)) != NUM_ENTRIES:
        raise InputError("keys must be distinct; two entries share a key")
    bundle_dir = dataio.ensure_dir(bundle_dir)
    entries = []
    for i, (rec, secret, plain) in enumerate(zip(keys, secrets, plaintexts), start=1):
        entries.append(
            ChallengeEntry(
                index=i,
                scenario=rec["scenario"],
                eve_position=int(rec.get("eve_position", 0)),
                eve_correlation=float(rec["eve_correlation"]),
                ciphertext=xor_bytes(plain, secret),
                start_frame_index=int(rec["start_index"]),
                input_length=int(rec["input_length"]),
                cme_per_bit=float(rec["cme_per_bit"]),
                eve_frames=_evidence_ref(rec["eve_frames"], bundle_dir),
                syndromes=_evidence_ref(rec["syndromes"], bundle_dir),
            )
        )
    bundle = ChallengeBundle(tuple(entries))
    with open(bundle_dir / "manifest.json", "w") as fh:
        json.dump(bundle.to_json(), fh, indent=2)
        fh.write("\n")
    return bundle


def decrypt(bundle: ChallengeBundle, keys) -> list[bytes]:
    return [xor_bytes(e.ciphertext, bytes(k)) for e, k in zip(bundle.entries, keys)]


def load_bundle(bundle_dir) -> ChallengeBundle:
    path = Path(bundle_dir) / "manifest.json"
    try:
        data = json.loads(path.read_text())
        if data.get("version") != BUNDLE_VERSION:
            raise FormatError(f"{path}: unsupported bundle version {data.get('version')!r}")
        entries = []
        for raw in data["entries"]:
            raw = dict(raw)
            raw["ciphertext"] = bytes.fromhex(raw["ciphertext"])
            entries.append(ChallengeEntry(**raw))
    except FileNotFoundError:
        raise InputError(f"no bundle manifest at {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"{path}: malformed bundle manifest ({exc})") from None
    return ChallengeBundle(tuple(entries))


def check_evidence(bundle: ChallengeBundle, bundle_dir) -> list[str]:
    """Evidence files whose content no longer matches the recorded hash."""
    bad = []
    for e in bundle.entries:
        for ref in (e.eve_frames, e.syndromes):
            path = Path(bundle_dir) / ref["path"]
            if not path.exists() or dataio.file_sha256(path) != ref["sha256"]:
                bad.append(ref["path"])
    return bad


def parse_submission(text: str) -> dict:
    """Parse ``{"<index>": "<64 hex digits>", ...}``; entries may be omitted."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"submission is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("submission must be a JSON object mapping entry index to hex plaintext")
    claims = {}
    for key, value in data.items():
        try:
            index = int(key)
        except ValueError:
            raise ParseError(f"entry key {key!r} is not an integer") from None
        if not 1 <= index <= NUM_ENTRIES:
            raise ParseError(f"entry index {index} outside 1..{NUM_ENTRIES}")
        if not isinstance(value, str):
            raise ParseError(f"entry {index}: plaintext must be a hex string")
        try:
            block = bytes.fromhex(value)
        except ValueError:
            raise ParseError(f"entry {index}: not hexadecimal") from None
        if len(block) != BLOCK_BYTES:
            raise ParseError(f"entry {index}: {len(block)} bytes, expected {BLOCK_BYTES}")
        claims[index] = block
    return claims


def verify_attempt(bundle: ChallengeBundle, claims: dict, truth) -> VerificationReport:
    """Score claimed plaintexts against the organizer's truth store."""
    truth = list(truth)
    if len(truth) != len(bundle.entries):
        raise InputError(f"truth store has {len(truth)} blocks for {len(bundle.entries)} entries")
    matches = {e.index: claims.get(e.index) == truth[e.index - 1] for e in bundle.entries}
    return VerificationReport(matches)


# -- key generation for the twenty scenarios ---------------------------------------


def generate_challenge_keys(base_cfg, out_dir, threads=1, only=None):
    """Run the full pipeline for each challenge scenario and collect the keys.

    Returns manifest records with revealed keys and absolute evidence paths.
    Scenarios listed in ``only`` (ids such as ``"los-dynamic-3"``) restrict
    the run, which is useful for smoke tests.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .pipeline import StageError, run_pipeline

    out_dir = dataio.ensure_dir(out_dir)
    jobs = []
    for position, (env, pos, scn) in enumerate(challenge_scenarios(base_cfg.scenario)):
        tag = f"{env}-{pos}"
        if only is not None and tag not in only:
            continue
        seed = int(np.random.SeedSequence([scn.rng_seed, position]).generate_state(1)[0])
        cfg = dataclasses.replace(
            base_cfg,
            scenario=dataclasses.replace(scn, rng_seed=seed),
            run=dataclasses.replace(base_cfg.run, scenario_id=env),
        )
        jobs.append((tag, pos, cfg))

    def run(job):
        tag, pos, cfg = job
        try:
            result = run_pipeline(cfg, out_dir / tag, reveal=True)
        except StageError as exc:
            if isinstance(exc.cause, (ExhaustionError, UnusableEntropyError)):
                raise InputError(
                    f"{tag}: no key ({exc.cause}); simulate more frames for this scenario"
                ) from exc
            raise
        rec = {
            "scenario": cfg.run.scenario_id,
            "eve_position": pos,
            "eve_correlation": cfg.scenario.eve_correlation,
            "start_index": result.alice_key.start_frame_index,
            "input_length": int(result.alice_key.input_bits.size),
            "cme_per_bit": result.estimate.cme_per_bit,
            "keys_agree": result.alice_key.key == result.bob_key.key,
            "key": result.alice_key.key.hex(),
            "eve_frames": str(result.artifacts["eve_frames"].resolve()),
            "syndromes": str(result.artifacts["syndromes"].resolve()),
        }
        return rec

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]


def load_key_records(path) -> list[dict]:
    """Read a key manifest with revealed keys; evidence paths resolve against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        records = data["keys"]
        out = []
        for rec in records:
            rec = dict(rec)
            if "key" not in rec:
                raise InputError(
                    f"{path}: key material missing; regenerate the manifest with --reveal"
                )
            rec["key"] = bytes.fromhex(rec["key"])
            for field_name in ("eve_frames", "syndromes"):
                value = rec.get(field_name) or rec.get("evidence", {}).get(field_name)
                if value is None:
                    raise ParseError(f"{path}: record without {field_name} evidence")
                rec[field_name] = str((path.parent / value).resolve())
            out.append(rec)
    except FileNotFoundError:
        raise InputError(f"key manifest {path} not found") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (InputError, ParseError)):
            raise
        raise ParseError(f"{path}: malformed key manifest ({exc})") from None
    return out
