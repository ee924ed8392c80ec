import pytest

from homodyne_cov import GaussianState, LocalOscillator, MeasurementSetting, DetectorNoiseModel
from homodyne_cov.traces import SimulationConfig

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def _record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def squeezed_config():
    return SimulationConfig(
        state=GaussianState(0.171, 0.79),
        lo=LocalOscillator(1.0),
        setting=MeasurementSetting(0.0, 1.0),
        noise=DetectorNoiseModel(),
        n_samples=1_000_000,
        seed=11,
    )
