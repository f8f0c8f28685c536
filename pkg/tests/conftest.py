import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drnla import lang  # noqa: E402
from drnla.cli import bundled_corpus  # noqa: E402
from drnla.refine import RefineConfig, refine_program  # noqa: E402

CORPUS = dict(bundled_corpus())


def corpus_names():
    return sorted(CORPUS)


@functools.lru_cache(maxsize=None)
def corpus_program(name: str) -> lang.Program:
    return lang.parse(Path(CORPUS[name]).read_text())


@functools.lru_cache(maxsize=None)
def refined(name: str, cfg: RefineConfig = RefineConfig()):
    """Refinement of a corpus program, shared across the session."""
    return refine_program(corpus_program(name), cfg)


@pytest.fixture(scope="session")
def cohencu5():
    return corpus_program("cohencu5.imp")


# ---------------------------------------------------- acceptance reporting

_criteria: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    outcomes = _criteria.setdefault(number, [])
    if report.when == "call" or report.outcome != "passed":
        outcomes.append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok = all(o == "passed" for o in _criteria[number])
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}")
