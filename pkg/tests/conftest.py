import pytest

from condhaar import cli
from condhaar.harness import reports_from_json

SEED = 7
_LINES = []


@pytest.fixture(scope="session")
def suite_run(tmp_path_factory):
    """One full ``verify --all`` run, single-threaded; returns ``(exit_code, bytes, reports)``."""
    path = tmp_path_factory.mktemp("suite") / "report.json"
    code = cli.main(["verify", "--all", "--seed", str(SEED), "--threads", "1", "--out", str(path)])
    raw = path.read_bytes()
    reports = {r.experiment_id: r for r in reports_from_json(raw.decode())}
    return code, raw, reports


@pytest.fixture(scope="session")
def reports(suite_run):
    return suite_run[2]


@pytest.fixture
def record():
    """Collect one acceptance line; printed again in the terminal summary."""
    def add(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
