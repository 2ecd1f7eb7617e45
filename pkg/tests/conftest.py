import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest  # noqa: E402

from opalg.phenomenology import parse_theory  # noqa: E402
from opalg.quotient import build_wea  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "opalg" / "data"


@pytest.fixture(scope="session")
def counterexample():
    return parse_theory((DATA / "paper-counterexample.th").read_text())


@pytest.fixture(scope="session")
def counterexample_wea(counterexample):
    return build_wea(counterexample)


@pytest.fixture(scope="session")
def classical_bit():
    return parse_theory((DATA / "classical-bit.th").read_text())


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
