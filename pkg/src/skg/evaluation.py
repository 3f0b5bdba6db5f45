"""Experiment grids over scenarios, quantization levels and code rates.

Each grid cell reports Alice-Bob and Alice-Eve bit mismatch, frame error
rates after reconciliation, conditional min-entropy and key rate, one CSV
row per cell. Subband powers are simulated once per scenario and shared by
all ``(Q, r)`` cells of that scenario.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dataio
from .amplify import key_rate
from .config import CodeSettings, EntropySettings
from .entropy import apply_safety_margin, conditional_min_entropy, eve_observation
from .errors import ConfigurationError, SKGError
from .filterbank import FilterbankConfig
from .pipeline import reconcile_blocks, simulate_powers
from .quantize import QuantConfig, quantize_powers
from .reconcile import construct_code
from .waveform import ChannelScenario, ChirpConfig

log = logging.getLogger(__name__)

MIN_FRAMES = 100

GRID_COLUMNS = [
    "scenario",
    "dynamic",
    "reciprocity_coeff",
    "eve_correlation",
    "snr_db",
    "seed",
    "levels",
    "rate",
    "block_length",
    "syndrome_length",
    "frames",
    "ab_mismatch",
    "ae_mismatch",
    "ab_fer",
    "ae_fer",
    "h_min_bits",
    "leakage_bits",
    "cme_per_bit",
    "cme_per_bit_effective",
    "key_rate",
    "converged",
    "status",
    "error",
]

# Eavesdropper placements of the measurement campaign, closest first, as
# channel correlations. Physical distance is not simulated.
EVE_CORRELATION_SWEEP = (0.9, 0.7, 0.5, 0.3, 0.1)


@dataclass(frozen=True)
class ExperimentGrid:
    scenarios: tuple  # of (name, ChannelScenario)
    levels: tuple = (4, 16)
    rates: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    frames: int = 1000
    seed: int = 0
    chirp: ChirpConfig = field(default_factory=ChirpConfig)
    num_filters: int = 16
    code: CodeSettings = field(default_factory=CodeSettings)
    entropy: EntropySettings = field(default_factory=EntropySettings)

    def __post_init__(self):
        named = tuple(
            item if isinstance(item, tuple) else (f"s{i}", item)
            for i, item in enumerate(self.scenarios)
        )
        object.__setattr__(self, "scenarios", named)
        if not named:
            raise ConfigurationError("grid has no scenarios")
        if len({name for name, _ in named}) != len(named):
            raise ConfigurationError("scenario names must be unique")
        if self.frames < MIN_FRAMES:
            raise ConfigurationError(f"frames per cell must be >= {MIN_FRAMES}, got {self.frames}")
        for q in self.levels:
            QuantConfig(levels=q)
        for r in self.rates:
            if not 0 < r < 1:
                raise ConfigurationError(f"rate {r} outside (0, 1)")

    @property
    def filterbank(self) -> FilterbankConfig:
        return FilterbankConfig(
            num_filters=self.num_filters,
            bandwidth_hz=self.chirp.bandwidth_hz,
            sample_rate_hz=self.chirp.sample_rate_hz,
        )

    def scenario_seed(self, position: int) -> int:
        """Seed of the ``position``-th scenario, derived from the master seed."""
        return int(np.random.SeedSequence([self.seed, position]).generate_state(1)[0])


def eve_sweep(base: ChannelScenario, correlations=EVE_CORRELATION_SWEEP, prefix="eve"):
    """Named copies of ``base`` over a range of eavesdropper correlations."""
    return tuple(
        (f"{prefix}{rho:g}", dataclasses.replace(base, eve_correlation=rho)) for rho in correlations
    )


def _cell(grid, name, scn, powers, q, rate):
    row = {
        "scenario": name,
        "dynamic": scn.dynamic,
        "reciprocity_coeff": scn.reciprocity_coeff,
        "eve_correlation": scn.eve_correlation,
        "snr_db": scn.snr_db,
        "seed": scn.rng_seed,
        "levels": q,
        "rate": rate,
        "frames": grid.frames,
    }
    quant = QuantConfig(levels=q)
    alice, bob, eve = (quantize_powers(p, quant) for p in powers)
    n = alice.shape[1]
    code = construct_code(n, rate, grid.code.design_param)
    row.update(block_length=n, syndrome_length=code.syndrome_length)
    rec = reconcile_blocks(alice, bob, eve, code, grid.code.crossover, grid.code.calibration_fraction)
    s = rec.summary
    row.update(ab_mismatch=s["ab_mismatch"], ae_mismatch=s["ae_mismatch"],
               ab_fer=s["ab_fer"], ae_fer=s["ae_fer"])
    ent = grid.entropy
    seg = quant.bits_per_measurement if ent.segment_bits is None else (ent.segment_bits or None)
    est = conditional_min_entropy(
        alice,
        eve_observation(powers[2], rec.syndromes, ent.observation, eve),
        segment_bits=seg,
        method=ent.method,
        max_bits=n - code.syndrome_length if ent.syndrome_cap else None,
        prior=ent.prior,
        train_fraction=ent.train_fraction,
        seed=ent.seed,
        bins=ent.bins,
    )
    cme_eff = apply_safety_margin(est, ent.margin)
    row.update(
        h_min_bits=est.min_entropy_bits_per_block,
        leakage_bits=est.leakage_bits,
        cme_per_bit=est.cme_per_bit,
        cme_per_bit_effective=cme_eff,
        key_rate=key_rate(grid.num_filters, q, s["ab_fer"], cme_eff),
        converged=est.converged,
        status="ok",
        error="",
    )
    return row


def _failed(name, scn, q, rate, frames, exc):
    return {
        "scenario": name,
        "dynamic": scn.dynamic,
        "reciprocity_coeff": scn.reciprocity_coeff,
        "eve_correlation": scn.eve_correlation,
        "snr_db": scn.snr_db,
        "seed": scn.rng_seed,
        "levels": q,
        "rate": rate,
        "frames": frames,
        "status": "failed",
        "error": f"{type(exc).__name__}: {exc}",
    }


def _run_scenario(grid, position):
    name, scn = grid.scenarios[position]
    scn = dataclasses.replace(scn, rng_seed=grid.scenario_seed(position))
    log.info("grid scenario %s", name)
    try:
        powers = simulate_powers(grid.chirp, scn, grid.filterbank, grid.frames)
    except (SKGError, ValueError, FloatingPointError) as exc:
        return [_failed(name, scn, q, r, grid.frames, exc) for q in grid.levels for r in grid.rates]
    rows = []
    for q in grid.levels:
        for rate in grid.rates:
            try:
                rows.append(_cell(grid, name, scn, powers, q, rate))
            except (SKGError, ValueError, FloatingPointError) as exc:
                log.warning("cell %s Q=%s r=%s failed: %s", name, q, rate, exc)
                rows.append(_failed(name, scn, q, rate, grid.frames, exc))
    return rows


def run_grid(grid: ExperimentGrid, threads: int = 1) -> list[dict]:
    """Evaluate every ``(scenario, Q, r)`` cell; failures are marked, not raised.

    Rows come back in scenario, Q, r order whatever the thread count.
    """
    positions = range(len(grid.scenarios))
    if threads <= 1:
        chunks = [_run_scenario(grid, p) for p in positions]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda p: _run_scenario(grid, p), positions))
    return [row for chunk in chunks for row in chunk]


def write_grid_csv(path, rows) -> None:
    dataio.write_csv(path, rows, GRID_COLUMNS)
