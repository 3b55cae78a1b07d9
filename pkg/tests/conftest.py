import numpy as np
import pytest

from depict_lab.concepts import ConceptSpace
from depict_lab.generators import GeneratorSpec
from depict_lab.render import CanvasSpec


@pytest.fixture
def space():
    return ConceptSpace()


@pytest.fixture
def canvas():
    return CanvasSpec()


@pytest.fixture
def oracle():
    return GeneratorSpec()


@pytest.fixture
def concept_matrix():
    return (np.random.default_rng(7).random((300, 6)) < 0.5).astype(np.uint8)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
