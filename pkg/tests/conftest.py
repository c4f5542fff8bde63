import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
