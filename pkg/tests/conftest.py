from __future__ import annotations

import sys
from pathlib import Path

import pytest

from termvar.lexicon import Entity, EntityKind, Lexicon, Term, read_dictionary

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def two_entities() -> list[Entity]:
    return [Entity("COVID-19", EntityKind.DISEASE), Entity("SARS-CoV-2", EntityKind.VIRUS)]


@pytest.fixture
def covid_lexicon(two_entities) -> Lexicon:
    return Lexicon(two_entities, [Term(s, "COVID-19") for s in ("COVID", "COVID-19", "COVID-19 disease")])


@pytest.fixture
def fixture_dict() -> Lexicon:
    return read_dictionary(DATA / "dict.tsv")


_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when == "teardown":
        return
    number, title = marker.args
    if rep.when == "call" or rep.failed:
        verdict = "PASS" if rep.passed else "FAIL"
        _ACCEPTANCE[number] = (title, verdict, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title} ({duration:.2f} s)")
