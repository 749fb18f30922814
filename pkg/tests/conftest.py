import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def verdict(request):
    """Record ``CRITERION n: PASS|FAIL`` and assert it (``ok=None`` skips).

    The lines are printed together in the terminal summary, so a run shows
    every criterion's outcome even when its assertion fails.
    """
    lines = request.config.stash.setdefault(_LINES, {})

    def record(n: int, ok, detail: str) -> None:
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        lines[n] = f"CRITERION {n:2d}: {status}  {detail}"
        if ok is None:
            pytest.skip(detail)
        assert ok, lines[n]

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
