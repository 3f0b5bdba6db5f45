"""Command-line front end: one subcommand per stage, all exchanging dataio files.

Typical session::

    skg simulate --out run/
    skg extract --frames run/alice.iqf --out run/alice.powers.csv
    skg quantize --powers run/alice.powers.csv --out run/alice.bits
    ...
    skg reconcile --alice run/alice.bits --bob run/bob.bits --eve run/eve.bits --out run/
    skg entropy --alice run/alice.bits --syndromes run/alice.synd \\
        --eve-powers run/eve.powers.csv --out run/entropy.csv
    skg distill --bits run/alice.bits --reconcile run/ --entropy run/entropy.csv --out run/keys.json

or simply ``skg run --out run/``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .amplify import distill_key
from .config import load_config
from .errors import ConfigurationError, SKGError
from .pipeline import (
    StageError,
    extract_stage,
    key_entry,
    quantize_stage,
    read_entropy_csv,
    reconcile_stage,
    run_pipeline,
    simulate_stage,
    entropy_stage,
    successful_blocks,
    write_key_manifest,
)

log = logging.getLogger("skg")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", metavar="INI", help="configuration file (sections per stage)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one configuration value; repeatable",
    )
    common.add_argument("--threads", type=int, default=1, metavar="N", help="maximum worker threads (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="skg",
        description="Secret key generation from reciprocal wireless channel measurements.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                              allow_abbrev=False)

    p = add("simulate", "simulate chirp exchanges and write alice/bob/eve .iqf frame stores")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, help="number of frames (overrides run.frames)")

    p = add("extract", "filterbank subband powers of an .iqf store, written as CSV")
    p.add_argument("--frames", dest="iqf", required=True, help="input .iqf file")
    p.add_argument("--out", required=True, help="output power CSV")

    p = add("quantize", "Gray-coded quantization of a power CSV into a .bits file")
    p.add_argument("--powers", required=True, help="input power CSV")
    p.add_argument("--out", required=True, help="output .bits file")

    p = add("reconcile", "syndromes from Alice's bits, SC decoding at Bob (and Eve)")
    p.add_argument("--alice", required=True, help="Alice's .bits")
    p.add_argument("--bob", required=True, help="Bob's .bits")
    p.add_argument("--eve", help="Eve's .bits (optional)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("entropy", "conditional min-entropy of Alice's blocks given Eve's view")
    p.add_argument("--alice", required=True, help="Alice's .bits")
    p.add_argument("--syndromes", required=True, help="Alice's .synd")
    p.add_argument("--eve-powers", help="Eve's power CSV")
    p.add_argument("--eve-bits", help="Eve's .bits (for entropy.observation = bits)")
    p.add_argument("--out", required=True, help="output entropy CSV")

    p = add("distill", "hash reconciled blocks into a 256-bit key")
    p.add_argument("--bits", required=True, help="blocks to hash (alice.bits or bob.rec.bits)")
    p.add_argument("--reconcile", required=True, help="directory written by the reconcile stage")
    p.add_argument("--entropy", required=True, help="entropy CSV")
    p.add_argument("--start-index", type=int, help="first frame to use (overrides run.start_index)")
    p.add_argument("--out", required=True, help="output key manifest (JSON)")
    p.add_argument("--reveal", action="store_true", help="store the key itself, not just its fingerprint")

    p = add("run", "all stages in order, writing every intermediate artifact")
    p.add_argument("--out", help="output directory (overrides paths.output_dir)")
    p.add_argument("--frames", type=int, help="number of frames (overrides run.frames)")
    p.add_argument("--reveal", action="store_true", help="store the key itself in keys.json")

    p = add("eval", "experiment grid over Eve correlation, Q and r; one CSV row per cell")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--frames", type=int, default=1000, help="frames per cell (default 1000)")
    p.add_argument("--full", action="store_true", help="use 100000 frames per cell")
    p.add_argument("--levels", type=int, nargs="+", default=[4, 16], help="quantization levels")
    p.add_argument("--rates", type=float, nargs="+", default=[0.1, 0.3, 0.5, 0.7, 0.9], help="code rates")
    p.add_argument("--eve-correlations", type=float, nargs="+", help="Eve correlation sweep")
    p.add_argument("--static", action="store_true", help="also evaluate the static-channel variant")

    ch = add("challenge", "one-time-pad challenge: generate keys, build bundle, score submissions")
    csub = ch.add_subparsers(dest="action", required=True, metavar="ACTION")

    def cadd(name, help_text):
        return csub.add_parser(name, parents=[common], help=help_text, description=help_text,
                               allow_abbrev=False)

    p = cadd("keys", "run the pipeline for the 20 challenge scenarios; writes a revealed key manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, help="frames per scenario (overrides run.frames)")
    p.add_argument("--only", nargs="+", metavar="ID", help="restrict to scenario ids like los-dynamic-3")

    p = cadd("make", "encrypt 20 plaintexts with 20 keys and write the public bundle")
    p.add_argument("--keys", required=True, help="key manifest with revealed keys")
    p.add_argument("--plaintexts", help="file of 20 x 32 bytes (default: generated ASCII text)")
    p.add_argument("--out", required=True, help="output directory; receives bundle/ and organizer/")

    p = cadd("verify", "score a submission against the organizer's plaintexts")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--submission", required=True, help='JSON object {"<index>": "<64 hex digits>"}')
    p.add_argument("--truth", help="plaintext store (default: <bundle>/../organizer/plaintexts.bin)")
    return parser


def _config(args, **run_overrides):
    overrides = list(args.overrides)
    for key, value in run_overrides.items():
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def cmd_simulate(args):
    cfg = _config(args, **{"run.frames": args.frames})
    paths = simulate_stage(cfg, args.out)
    for path in paths.values():
        print(path)


def cmd_extract(args):
    cfg = _config(args)
    powers = extract_stage(args.iqf, cfg.filterbank, args.out, cfg.run.chunk)
    print(f"{args.out}: {powers.shape[0]} frames x {powers.shape[1]} subbands")


def cmd_quantize(args):
    cfg = _config(args)
    bits = quantize_stage(args.powers, cfg.quant, args.out)
    print(f"{args.out}: {bits.shape[0]} blocks of {bits.shape[1]} bits")


def cmd_reconcile(args):
    cfg = _config(args)
    rec = reconcile_stage(args.alice, args.bob, args.eve, cfg.code, args.out)
    print(json.dumps(rec.summary, indent=2, sort_keys=True))


def cmd_entropy(args):
    cfg = _config(args)
    if args.eve_powers is None and cfg.entropy.observation == "powers":
        raise ConfigurationError("--eve-powers is required unless entropy.observation = bits")
    est = entropy_stage(args.alice, args.eve_powers, args.syndromes, cfg, args.out, args.eve_bits)
    print(f"CME {est.cme_bits_per_block:.4g} bits/block ({est.cme_per_bit:.4g}/bit), "
          f"converged={est.converged}")


def _read_success(reconcile_dir):
    reconcile_dir = Path(reconcile_dir)
    with open(reconcile_dir / "reconcile.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["node"] == "bob"]
    success = np.zeros(len(rows), dtype=bool)
    for r in rows:
        success[int(r["frame_index"])] = r["success"] == "1"
    summary = json.loads((reconcile_dir / "reconcile.json").read_text())
    return success, int(summary["calibration_frames"])


def cmd_distill(args):
    cfg = _config(args)
    blocks = dataio.read_bits(args.bits)
    success, calibration = _read_success(args.reconcile)
    if len(success) != blocks.shape[0]:
        raise ConfigurationError(
            f"{args.bits} has {blocks.shape[0]} blocks but reconcile.csv covers {len(success)} frames"
        )
    cme = read_entropy_csv(args.entropy)
    cme_eff = (1 - cfg.entropy.margin) * cme
    start = cfg.run.start_index if args.start_index is None else args.start_index
    first = max(start, calibration)
    key = distill_key(successful_blocks(blocks, success, first), first, cme_eff, cfg.run.scenario_id)
    write_key_manifest(args.out, [key_entry(key, None, cme, cfg, args.reveal)])
    print(f"key {key.fingerprint} from {key.input_bits.size} bits, frames "
          f"{key.frames_used[0]}..{key.frames_used[-1]}")


def cmd_run(args):
    cfg = _config(args, **{"run.frames": args.frames, "paths.output_dir": args.out})
    result = run_pipeline(cfg, reveal=args.reveal)
    s = result.reconciliation.summary
    print(f"artifacts in {result.out_dir}")
    print(f"A-B mismatch {s['ab_mismatch']:.4f}, FER {s['ab_fer']:.4f}; "
          f"A-E mismatch {s['ae_mismatch']:.4f}, FER {s['ae_fer']:.4f}")
    print(f"CME {result.estimate.cme_per_bit:.4f}/bit, effective {result.cme_effective:.4f}, "
          f"key rate {result.key_rate:.3f} bits/frame")
    agree = "agree" if result.alice_key.key == result.bob_key.key else "DIFFER"
    print(f"key {result.alice_key.fingerprint} ({agree} at Alice and Bob)")
    if result.alice_key.key != result.bob_key.key:
        return 1
    return 0


def cmd_eval(args):
    from .evaluation import EVE_CORRELATION_SWEEP, ExperimentGrid, eve_sweep, run_grid, write_grid_csv

    cfg = _config(args)
    corr = args.eve_correlations or EVE_CORRELATION_SWEEP
    scenarios = eve_sweep(dataclasses.replace(cfg.scenario, dynamic=True), corr, "dynamic-eve")
    if args.static:
        scenarios += eve_sweep(dataclasses.replace(cfg.scenario, dynamic=False), corr, "static-eve")
    grid = ExperimentGrid(
        scenarios=scenarios,
        levels=tuple(args.levels),
        rates=tuple(args.rates),
        frames=100_000 if args.full else args.frames,
        seed=cfg.scenario.rng_seed,
        chirp=cfg.chirp,
        num_filters=cfg.filterbank.num_filters,
        code=cfg.code,
        entropy=cfg.entropy,
    )
    rows = run_grid(grid, threads=args.threads)
    write_grid_csv(args.out, rows)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{args.out}: {len(rows)} cells, {failed} failed")
    return 1 if failed else 0


def cmd_challenge(args):
    from . import challenge

    if args.action == "keys":
        cfg = _config(args, **{"run.frames": args.frames})
        out = dataio.ensure_dir(args.out)
        records = challenge.generate_challenge_keys(cfg, out, args.threads, args.only)
        for rec in records:
            for name in ("eve_frames", "syndromes"):
                rec[name] = os.path.relpath(rec[name], out)
        manifest = out / "keys.json"
        with open(manifest, "w") as fh:
            json.dump({"keys": records}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"{manifest}: {len(records)} keys (contains key material; keep it private)")
        return 0 if all(r["keys_agree"] for r in records) else 1
    if args.action == "make":
        records = challenge.load_key_records(args.keys)
        plaintexts = (
            challenge.read_plaintexts(args.plaintexts)
            if args.plaintexts
            else challenge.default_plaintexts()
        )
        out = Path(args.out)
        bundle = challenge.make_challenge(records, plaintexts, out / "bundle")
        organizer = dataio.ensure_dir(out / "organizer")
        challenge.write_plaintexts(organizer / "plaintexts.bin", plaintexts)
        print(f"{out / 'bundle' / 'manifest.json'}: {len(bundle.entries)} ciphertexts")
        print(f"{organizer / 'plaintexts.bin'}: organizer truth store (keep private)")
        return 0
    bundle_dir = Path(args.bundle)
    bundle = challenge.load_bundle(bundle_dir)
    truth_path = args.truth or bundle_dir.parent / "organizer" / "plaintexts.bin"
    truth = challenge.read_plaintexts(truth_path)
    claims = challenge.parse_submission(Path(args.submission).read_text())
    report = challenge.verify_attempt(bundle, claims, truth)
    print(report.summary())
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "quantize": cmd_quantize,
    "reconcile": cmd_reconcile,
    "entropy": cmd_entropy,
    "distill": cmd_distill,
    "run": cmd_run,
    "eval": cmd_eval,
    "challenge": cmd_challenge,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        status = COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"skg: configuration error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"skg: {exc}", file=sys.stderr)
        return 1
    except (SKGError, OSError) as exc:
        print(f"skg {args.command}: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
