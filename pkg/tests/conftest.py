import pytest

_LINES: list[str] = []


@pytest.fixture
def record():
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the summary."""

    def _record(number: int, ok: bool, detail: str, label: str | None = None) -> bool:
        tag = label or ("PASS" if ok else "FAIL")
        line = f"{tag} criterion {number:2d}: {detail}"
        print(line)
        _LINES.append(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
