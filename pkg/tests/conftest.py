import pytest

from liftprop.corpus import EXAMPLE_DSL, example_network, random_corpus

CORPUS_SIZE = 500
CORPUS_SEED = 1

# (criterion number, title, passed, detail), filled in by test_acceptance
ACCEPTANCE_RESULTS = []


@pytest.fixture
def fig1():
    return example_network()


@pytest.fixture
def fig1_text():
    return EXAMPLE_DSL


@pytest.fixture(scope="session")
def corpus():
    return random_corpus(CORPUS_SIZE, seed=CORPUS_SEED, max_functions=20)


@pytest.fixture(scope="session")
def smooth_corpus():
    return random_corpus(20, seed=7, max_functions=8, smooth=True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{num}] {title}: {detail}")
