"""SKG stages wired together: simulate, extract, quantize, reconcile, estimate, distill.

Every stage has an in-memory core (used by the experiment harness) and a
file-based wrapper whose inputs and outputs are the formats of
:mod:`skg.dataio`, so any stage can be rerun from disk on its own.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio
from .amplify import KeyMaterial, distill_key, key_rate, required_input_length
from .config import PipelineConfig, dump_config
from .entropy import EntropyEstimate, apply_safety_margin, conditional_min_entropy, eve_observation
from .errors import InputError, SKGError
from .filterbank import FilterbankConfig, build_filterbank, extract_powers
from .quantize import QuantConfig, mismatch_probability, quantize_powers
from .reconcile import (
    check_values,
    construct_code,
    decode_blocks,
    estimate_crossover,
    frame_error_rate,
    make_syndromes,
)
from .waveform import ChannelScenario, ChirpConfig, Node, synthesize_block

log = logging.getLogger(__name__)

ENTROPY_COLUMNS = [
    "scenario",
    "eve_correlation",
    "rate",
    "estimator",
    "h_min_bits",
    "leakage_bits",
    "cme_bits",
    "cme_per_bit",
    "converged",
]


class StageError(SKGError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


# -- simulation and extraction -------------------------------------------------


def simulate_powers(chirp: ChirpConfig, scn: ChannelScenario, fb: FilterbankConfig,
                    frames: int, chunk: int = 250, writers=None) -> np.ndarray:
    """Subband powers of all three nodes, ``(3, frames, K)``.

    Frames are synthesized in chunks; ``writers`` (one :class:`FrameWriter`
    per node) optionally receive the raw samples as they are produced.
    """
    bank = build_filterbank(fb)
    out = np.empty((3, frames, fb.num_filters))
    for lo in range(0, frames, chunk):
        hi = min(frames, lo + chunk)
        block = synthesize_block(chirp, scn, range(lo, hi))
        for node in Node:
            if writers is not None:
                writers[node].write(block[node])
            out[node, lo:hi] = extract_powers(block[node], bank)
    return out


def simulate_stage(cfg: PipelineConfig, out_dir) -> dict:
    out_dir = dataio.ensure_dir(out_dir)
    paths = {node: out_dir / f"{node.name.lower()}.iqf" for node in Node}
    writers = {node: dataio.FrameWriter(paths[node], node, cfg.chirp) for node in Node}
    try:
        simulate_powers(cfg.chirp, cfg.scenario, cfg.filterbank, cfg.run.frames,
                        cfg.run.chunk, writers)
    finally:
        for writer in writers.values():
            writer.close()
    return paths


def extract_stage(iqf_path, fb: FilterbankConfig, out_csv, chunk: int = 250) -> np.ndarray:
    node, chirp, samples = dataio.read_frame_array(iqf_path)
    if (chirp.bandwidth_hz, chirp.sample_rate_hz) != (fb.bandwidth_hz, fb.sample_rate_hz):
        raise InputError(
            f"{iqf_path}: recorded at B={chirp.bandwidth_hz}, fs={chirp.sample_rate_hz}; "
            f"filterbank expects B={fb.bandwidth_hz}, fs={fb.sample_rate_hz}"
        )
    bank = build_filterbank(fb)
    powers = np.vstack(
        [extract_powers(samples[lo : lo + chunk], bank) for lo in range(0, len(samples), chunk)]
    ) if len(samples) else np.zeros((0, fb.num_filters))
    dataio.write_power_csv(out_csv, powers, node)
    return powers


def quantize_stage(power_csv, quant: QuantConfig, out_bits) -> np.ndarray:
    _, _, powers = dataio.read_power_csv(power_csv)
    bits = quantize_powers(powers, quant)
    dataio.write_bits(out_bits, bits)
    return bits


# -- reconciliation --------------------------------------------------------------


@dataclass
class Reconciliation:
    syndromes: np.ndarray
    checks: np.ndarray
    bob_decoded: np.ndarray
    bob_success: np.ndarray
    crossover_bob: float
    calibration_frames: int
    eve_decoded: np.ndarray | None = None
    eve_success: np.ndarray | None = None
    crossover_eve: float | None = None
    summary: dict = field(default_factory=dict)


def reconcile_blocks(alice, bob, eve, code, crossover=None, calibration_fraction=0.1) -> Reconciliation:
    """Alice publishes syndromes and check values; Bob and Eve decode.

    Without an explicit crossover the first ``calibration_fraction`` of the
    frames are disclosed to estimate it. Those frames are public from then
    on, so Eve calibrates on them too and they never enter a key.
    """
    alice = np.asarray(alice, dtype=np.uint8)
    bob = np.asarray(bob, dtype=np.uint8)
    if alice.shape != bob.shape:
        raise InputError(f"Alice's blocks {alice.shape} and Bob's {bob.shape} differ in shape")
    frames = alice.shape[0]
    if crossover is None:
        n_cal = min(frames, max(1, int(round(calibration_fraction * frames))))
        p_bob = estimate_crossover(alice[:n_cal], bob[:n_cal])
    else:
        n_cal, p_bob = 0, float(crossover)
    syndromes = make_syndromes(alice, code)
    checks = check_values(alice)
    bob_decoded = decode_blocks(bob, syndromes, code, p_bob)
    result = Reconciliation(
        syndromes=syndromes,
        checks=checks,
        bob_decoded=bob_decoded,
        bob_success=check_values(bob_decoded) == checks,
        crossover_bob=p_bob,
        calibration_frames=n_cal,
    )
    result.summary = {
        "frames": frames,
        "block_length": code.block_length,
        "rate": code.rate,
        "syndrome_length": code.syndrome_length,
        "calibration_frames": n_cal,
        "crossover_bob": p_bob,
        "ab_mismatch": mismatch_probability(alice, bob) if frames else 0.0,
        "ab_fer": frame_error_rate(alice, bob_decoded) if frames else 0.0,
    }
    if eve is not None:
        eve = np.asarray(eve, dtype=np.uint8)
        if eve.shape != alice.shape:
            raise InputError(f"Eve's blocks {eve.shape} differ in shape from Alice's {alice.shape}")
        p_eve = estimate_crossover(alice[:n_cal], eve[:n_cal]) if n_cal else p_bob
        result.eve_decoded = decode_blocks(eve, syndromes, code, p_eve)
        result.eve_success = check_values(result.eve_decoded) == checks
        result.crossover_eve = p_eve
        result.summary.update(
            crossover_eve=p_eve,
            ae_mismatch=mismatch_probability(alice, eve) if frames else 0.0,
            ae_fer=frame_error_rate(alice, result.eve_decoded) if frames else 0.0,
        )
    return result


def reconcile_stage(alice_bits, bob_bits, eve_bits, code_settings, out_dir) -> Reconciliation:
    out_dir = dataio.ensure_dir(out_dir)
    alice = dataio.read_bits(alice_bits)
    bob = dataio.read_bits(bob_bits)
    eve = dataio.read_bits(eve_bits) if eve_bits is not None else None
    code = construct_code(alice.shape[1], code_settings.rate, code_settings.design_param)
    rec = reconcile_blocks(alice, bob, eve, code, code_settings.crossover,
                           code_settings.calibration_fraction)
    dataio.write_syndromes(out_dir / "alice.synd", rec.syndromes)
    dataio.write_bits(out_dir / "alice.chk", _check_bits(rec.checks))
    dataio.write_bits(out_dir / "bob.rec.bits", rec.bob_decoded)
    rows = _decode_rows("bob", bob, rec.bob_decoded, rec.bob_success)
    if eve is not None:
        dataio.write_bits(out_dir / "eve.rec.bits", rec.eve_decoded)
        rows += _decode_rows("eve", eve, rec.eve_decoded, rec.eve_success)
    dataio.write_csv(out_dir / "reconcile.csv", rows, ["node", "frame_index", "success", "bit_errors"])
    _write_json(out_dir / "reconcile.json", rec.summary)
    return rec


def _check_bits(checks):
    return np.unpackbits(checks.astype(">u2").view(np.uint8).reshape(-1, 2), axis=1)


def read_checks(path) -> np.ndarray:
    bits = dataio.read_bits(path)
    return np.packbits(bits, axis=1).view(">u2").reshape(-1).astype(np.uint16)


def _decode_rows(node, observed, decoded, success):
    corrected = np.sum(observed != decoded, axis=1)
    return [
        {"node": node, "frame_index": i, "success": bool(ok), "bit_errors": int(c)}
        for i, (ok, c) in enumerate(zip(success, corrected))
    ]


# -- entropy -------------------------------------------------------------------------


def estimate_cme(alice, eve_powers, syndromes, cfg: PipelineConfig, eve_bits=None) -> EntropyEstimate:
    settings = cfg.entropy
    observations = eve_observation(eve_powers, syndromes, settings.observation, eve_bits)
    n = alice.shape[1]
    return conditional_min_entropy(
        alice,
        observations,
        segment_bits=cfg.segment_bits,
        method=settings.method,
        max_bits=n - syndromes.shape[1] if settings.syndrome_cap else None,
        prior=settings.prior,
        train_fraction=settings.train_fraction,
        seed=settings.seed,
        bins=settings.bins,
    )


def entropy_row(est: EntropyEstimate, cfg: PipelineConfig) -> dict:
    return {
        "scenario": cfg.run.scenario_id,
        "eve_correlation": cfg.scenario.eve_correlation,
        "rate": cfg.code.rate,
        "estimator": est.estimator,
        "h_min_bits": est.min_entropy_bits_per_block,
        "leakage_bits": est.leakage_bits,
        "cme_bits": est.cme_bits_per_block,
        "cme_per_bit": est.cme_per_bit,
        "converged": est.converged,
    }


def entropy_stage(alice_bits, eve_powers_csv, syndromes_path, cfg: PipelineConfig, out_csv,
                  eve_bits_path=None) -> EntropyEstimate:
    alice = dataio.read_bits(alice_bits)
    syndromes = dataio.read_syndromes(syndromes_path)
    eve_powers = eve_bits = None
    if eve_powers_csv is not None:
        _, _, eve_powers = dataio.read_power_csv(eve_powers_csv)
    if eve_bits_path is not None:
        eve_bits = dataio.read_bits(eve_bits_path)
    if eve_powers is None:
        eve_powers = np.ones((alice.shape[0], 1))
    est = estimate_cme(alice, eve_powers, syndromes, cfg, eve_bits)
    dataio.write_csv(out_csv, [entropy_row(est, cfg)], ENTROPY_COLUMNS)
    return est


def read_entropy_csv(path) -> float:
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 1:
        raise InputError(f"{path}: expected exactly one entropy row, found {len(rows)}")
    return float(rows[0]["cme_per_bit"])


# -- privacy amplification ----------------------------------------------------------


def successful_blocks(blocks, success, first_frame=0):
    return [(i, blocks[i]) for i in np.flatnonzero(success) if i >= first_frame]


def distill_pair(alice, bob_decoded, success, cme_effective, start_index, scenario="",
                 calibration_frames=0):
    """Distill Alice's and Bob's keys from the frames both agree on."""
    first = max(start_index, calibration_frames)
    alice_key = distill_key(successful_blocks(alice, success, first), first, cme_effective, scenario)
    bob_key = distill_key(successful_blocks(bob_decoded, success, first), first, cme_effective, scenario)
    return alice_key, bob_key


def key_entry(key: KeyMaterial, bob_key: KeyMaterial | None, cme_per_bit, cfg: PipelineConfig,
              reveal=False, evidence=None) -> dict:
    entry = {
        "scenario": key.scenario,
        "eve_correlation": cfg.scenario.eve_correlation,
        "start_index": key.start_frame_index,
        "input_length": int(key.input_bits.size),
        "cme_per_bit": cme_per_bit,
        "cme_per_bit_effective": key.cme_per_bit_effective,
        "frames_used": [key.frames_used[0], key.frames_used[-1]] if key.frames_used else [],
        "fingerprint": key.fingerprint,
    }
    if bob_key is not None:
        entry["keys_agree"] = bob_key.key == key.key
    if evidence:
        entry["evidence"] = evidence
    if reveal:
        entry["key"] = key.key.hex()
    return entry


def write_key_manifest(path, entries) -> None:
    _write_json(path, {"keys": list(entries)})


def read_key_manifest(path) -> list:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not isinstance(data.get("keys"), list):
        raise InputError(f"{path}: not a key manifest")
    return data["keys"]


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- full run ------------------------------------------------------------------------


@dataclass
class PipelineResult:
    out_dir: Path
    reconciliation: Reconciliation
    estimate: EntropyEstimate
    cme_effective: float
    alice_key: KeyMaterial
    bob_key: KeyMaterial
    key_rate: float
    artifacts: dict


def _stage(name, func, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return func(*args, **kwargs)
    except SKGError as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, out_dir=None, reveal=False) -> PipelineResult:
    """Advantage distillation, reconciliation and privacy amplification, end to end.

    Every intermediate artifact is written to ``out_dir`` (default
    ``cfg.output_dir``); a failing stage raises :class:`StageError` and keeps
    whatever was already written.
    """
    out = dataio.ensure_dir(out_dir or cfg.output_dir)
    (out / "config.ini").write_text(dump_config(cfg))
    iqf = _stage("simulate", simulate_stage, cfg, out)
    artifacts = {f"{node.name.lower()}_frames": path for node, path in iqf.items()}
    for node in Node:
        name = node.name.lower()
        csv_path = out / f"{name}.powers.csv"
        _stage("extract", extract_stage, iqf[node], cfg.filterbank, csv_path, cfg.run.chunk)
        bits_path = out / f"{name}.bits"
        _stage("quantize", quantize_stage, csv_path, cfg.quant, bits_path)
        artifacts[f"{name}_powers"] = csv_path
        artifacts[f"{name}_bits"] = bits_path
    rec = _stage("reconcile", reconcile_stage, artifacts["alice_bits"], artifacts["bob_bits"],
                 artifacts["eve_bits"], cfg.code, out)
    artifacts["syndromes"] = out / "alice.synd"
    est = _stage("entropy", entropy_stage, artifacts["alice_bits"], artifacts["eve_powers"],
                 artifacts["syndromes"], cfg, out / "entropy.csv",
                 eve_bits_path=artifacts["eve_bits"] if cfg.entropy.observation == "bits" else None)
    cme_eff = apply_safety_margin(est, cfg.entropy.margin)
    alice = dataio.read_bits(artifacts["alice_bits"])
    alice_key, bob_key = _stage(
        "distill", distill_pair, alice, rec.bob_decoded, rec.bob_success, cme_eff,
        cfg.run.start_index, cfg.run.scenario_id, rec.calibration_frames,
    )
    evidence = {"eve_frames": artifacts["eve_frames"].name, "syndromes": "alice.synd"}
    write_key_manifest(
        out / "keys.json",
        [key_entry(alice_key, bob_key, est.cme_per_bit, cfg, reveal, evidence)],
    )
    fer = rec.summary["ab_fer"]
    rate = key_rate(cfg.filterbank.num_filters, cfg.quant.levels, fer, cme_eff)
    artifacts["keys"] = out / "keys.json"
    return PipelineResult(out, rec, est, cme_eff, alice_key, bob_key, rate, artifacts)


def required_frames_hint(cme_effective: float, block_length: int, fer: float) -> int:
    """Rough number of frames needed to gather one key's input at a given FER."""
    bits = required_input_length(cme_effective)
    per_frame = block_length * max(1e-9, 1 - fer)
    return int(np.ceil(bits / per_frame))
