import pytest

from dimsim.experiments import CONTROLLERS, PAPER_DENSITIES, ScenarioConfig, run_sweep

SEEDS = (1, 2, 3, 4, 5)
UNBALANCED = (4, 3, 2, 1)

# (criterion, passed, detail) lines collected by the acceptance suite
VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def verdict():
    def record(name: str, ok: bool, detail: str = "") -> bool:
        VERDICTS.append((name, bool(ok), detail))
        return ok
    return record


@pytest.fixture(scope="session")
def grid_rows():
    """Full-hour comparison grid, run once per session (several minutes on one core)."""
    base = ScenarioConfig()
    rows = run_sweep(base, PAPER_DENSITIES, CONTROLLERS, [None], SEEDS)
    rows += run_sweep(base, PAPER_DENSITIES, ["DIM"], [UNBALANCED], SEEDS)
    rows += run_sweep(base, [350], ["DIM"], [None], SEEDS, arms=[3, 5])
    return rows


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in VERDICTS:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
