"""Shared fixtures and the acceptance-criteria report table."""
import pytest

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    """Register one acceptance criterion outcome for the terminal summary."""
    ACCEPTANCE_RESULTS.append((name, passed, detail))
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {name}: {status}" + (f" — {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cpu_pool():
    """Process pool shared by the heavy acceptance grids."""
    import os
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        yield pool
