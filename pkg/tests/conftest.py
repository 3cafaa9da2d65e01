from __future__ import annotations

import pytest

from lexrationale import synth

# small but learnable corpora for unit tests; the acceptance module builds full-size ones
SMALL = dict(
    doc_length=(120, 220),
    background_vocab=600,
    topic_vocab=60,
)


@pytest.fixture(scope="session")
def small_train():
    corpus, truth = synth.generate(synth.GenConfig(n_resp=30, n_nonresp=60, id_prefix="tr", seed=11, **SMALL))
    return corpus, truth


@pytest.fixture(scope="session")
def small_test():
    corpus, truth = synth.generate(synth.GenConfig(n_resp=40, n_nonresp=80, id_prefix="te", seed=12, **SMALL))
    return corpus, truth


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion checked by this test")
    config._acceptance_results = {}
    config._acceptance_notes = {}


@pytest.fixture
def note(request):
    """Attach measured values to the acceptance summary line of the current test."""
    marker = request.node.get_closest_marker("acceptance")
    notes = request.config._acceptance_notes

    def add(text: str) -> None:
        if marker is not None:
            notes.setdefault(marker.args[0], []).append(text)

    return add


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    results = item.config._acceptance_results
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when == "call" or failed:
        prev = results.get(number, (title, True))
        results[number] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config._acceptance_results
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok = results[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
        for text in config._acceptance_notes.get(number, []):
            terminalreporter.write_line(f"              {text}")
