import numpy as np
import pytest

from cipherchain import Alphabet, build_model, normalize
from cipherchain.corpus import sample_plaintext, stdlib_corpus

_ACCEPTANCE_LINES = []


def record_criterion(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def corpus_text():
    return stdlib_corpus()


@pytest.fixture(scope="session")
def english():
    return Alphabet.english()


@pytest.fixture(scope="session")
def english_model(corpus_text, english):
    return build_model(normalize(corpus_text, english), english, delta=1.0)


@pytest.fixture(scope="session")
def plaintext(english):
    return normalize(sample_plaintext(), english)


@pytest.fixture(scope="session")
def small_alphabet():
    return Alphabet.from_string("ETAO")


@pytest.fixture(scope="session")
def small_model(corpus_text, small_alphabet):
    return build_model(normalize(corpus_text, small_alphabet), small_alphabet, delta=1.0)


@pytest.fixture(scope="session")
def small_plaintext(small_alphabet):
    return normalize(sample_plaintext(), small_alphabet)[:200]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
