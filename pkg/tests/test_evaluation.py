import dataclasses
import math

import pytest

from skg.config import PipelineConfig
from skg.errors import ConfigurationError
from skg.evaluation import ExperimentGrid, eve_sweep, run_grid, write_grid_csv

BASE = PipelineConfig().scenario


@pytest.fixture(scope="module")
def grid():
    scenarios = eve_sweep(BASE, (0.0, 0.9))
    return ExperimentGrid(scenarios, levels=(4, 16), rates=(0.1, 0.5, 0.9), frames=300, seed=3)


@pytest.fixture(scope="module")
def rows(grid):
    return run_grid(grid)


def test_one_row_per_cell(rows):
    assert len(rows) == 2 * 2 * 3
    assert all(r["status"] == "ok" for r in rows)
    assert [(r["levels"], r["rate"]) for r in rows[:6]] == [
        (4, 0.1), (4, 0.5), (4, 0.9), (16, 0.1), (16, 0.5), (16, 0.9)
    ]


def test_csv_is_deterministic(grid, rows, tmp_path):
    write_grid_csv(tmp_path / "a.csv", rows)
    write_grid_csv(tmp_path / "b.csv", run_grid(grid, threads=2))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_more_levels_more_mismatch(rows):
    for name in ("eve0", "eve0.9"):
        ab = {r["levels"]: r["ab_mismatch"] for r in rows if r["scenario"] == name}
        assert ab[16] >= ab[4]


def test_fer_non_increasing_as_rate_decreases(rows):
    for name in ("eve0", "eve0.9"):
        for q in (4, 16):
            fer = [r["ab_fer"] for r in rows if r["scenario"] == name and r["levels"] == q]
            assert fer[0] <= fer[1] <= fer[2]


def test_independent_eve_at_chance(rows):
    for r in rows:
        if r["scenario"] == "eve0" and r["levels"] == 16:
            assert abs(r["ae_mismatch"] - 0.5) <= 0.03


def test_perfect_reciprocity_rate():
    scn = dataclasses.replace(BASE, reciprocity_coeff=1.0, snr_db=math.inf)
    grid = ExperimentGrid((("ideal", scn),), levels=(16,), rates=(0.3,), frames=200)
    (row,) = run_grid(grid)
    assert row["ab_mismatch"] == 0 and row["ab_fer"] == 0
    assert row["key_rate"] == pytest.approx(64 * row["cme_per_bit_effective"])


def test_failed_cells_are_marked(monkeypatch):
    import skg.evaluation as ev

    def boom(*args, **kwargs):
        raise ValueError("synthetic failure")

    monkeypatch.setattr(ev, "conditional_min_entropy", boom)
    grid = ExperimentGrid(eve_sweep(BASE, (0.5,)), levels=(4,), rates=(0.3, 0.7), frames=100)
    rows = run_grid(grid)
    assert [r["status"] for r in rows] == ["failed", "failed"]
    assert "synthetic failure" in rows[0]["error"]


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        ExperimentGrid((BASE,), frames=50)
    with pytest.raises(ConfigurationError):
        ExperimentGrid((BASE,), levels=(3,))
    with pytest.raises(ConfigurationError):
        ExperimentGrid((("a", BASE), ("a", BASE)))
    with pytest.raises(ConfigurationError):
        ExperimentGrid((BASE,), rates=(1.0,))


def test_scenario_seeds_differ_and_repeat():
    g = ExperimentGrid((BASE, BASE), seed=11)
    assert g.scenario_seed(0) != g.scenario_seed(1)
    assert g.scenario_seed(0) == ExperimentGrid((BASE,), seed=11).scenario_seed(0)
