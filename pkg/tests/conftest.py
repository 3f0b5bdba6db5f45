import pytest

from skg.config import PipelineConfig, load_config

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    criterion = dict(report.user_properties).get("criterion")
    if criterion is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = criterion
        previous = _ACCEPTANCE.get(number, (title, "PASS"))[1]
        status = "PASS" if report.passed and previous == "PASS" else "FAIL"
        _ACCEPTANCE[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


@pytest.fixture
def small_config(tmp_path):
    """Default pipeline with few frames and Q=4, writing under tmp_path."""
    return load_config(
        overrides=["run.frames=300", "quant.levels=4", f"paths.output_dir={tmp_path / 'run'}"],
        env={},
    )


@pytest.fixture
def default_config():
    return PipelineConfig()
