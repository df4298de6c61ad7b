import pytest

from helpers import ieee33
from smess.assembly import assemble


@pytest.fixture(scope="session")
def scn33():
    return ieee33()


@pytest.fixture(scope="session")
def model33(scn33):
    return assemble(scn33)


ACCEPTANCE: dict[str, tuple[str, str]] = {}


def record(criterion: str, passed: bool | None, detail: str) -> None:
    """Remember one acceptance line; ``None`` marks a skipped criterion."""
    verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE[criterion] = (verdict, detail)
    print(f"ACCEPTANCE {criterion}: {verdict} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{verdict:4}  criterion {key}: {detail}")
