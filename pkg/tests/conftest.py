import json
from pathlib import Path

import numpy as np
import pytest

from flagopt.estimator import check_partition
from flagopt.geometry import FlagShape
from flagopt.integrals import IntegralSet, read_fcidump

DATA = Path(__file__).parent / "data"
FIXTURES = ("ch2_triplet_sto3g", "oh_doublet_sto3g")


def load_fixture(name):
    ints = read_fcidump(DATA / f"{name}.fcidump")
    return ints, check_partition(ints)


def references():
    with open(DATA / "references.json") as f:
        return json.load(f)


def linear_model(n_basis=6, seed=0):
    """Interaction-free integrals with a diagonal, well-separated ``h``."""
    rng = np.random.default_rng(seed)
    diag = np.sort(rng.uniform(-3.0, 1.0, n_basis))
    diag += 0.3 * np.arange(n_basis)
    return IntegralSet(n_basis, 0.0, np.diag(diag), np.zeros((n_basis,) * 4))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session", params=FIXTURES)
def fixture_case(request):
    ints, shape = load_fixture(request.param)
    return request.param, ints, shape, references()[request.param]["energy"]


@pytest.fixture
def shape_223():
    return FlagShape.from_sizes(2, 2, 3)


#: one line per acceptance criterion, filled by test_acceptance
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
