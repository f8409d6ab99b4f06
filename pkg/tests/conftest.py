import itertools

import numpy as np
import pytest

from polysens.modelfile import fixture_path, load_model

ACCEPTANCE_LINES: list[str] = []


def brute_joint(spec):
    """Joint distribution by direct chain-rule multiplication, independent of the compiler."""
    names = spec.names
    card = spec.card
    out = {}
    for y in itertools.product(*(range(card[n]) for n in names)):
        assign = dict(zip(names, y))
        prob = 1.0
        for n in names:
            config = tuple(assign[p] for p in spec.parents.get(n, ()))
            prob *= spec.cpts[n][config][assign[n]]
        out[y] = prob
    return out


def brute_dbn_joint(dbn, horizon):
    """Trajectory probabilities by simulating the chain rule slice by slice."""
    init = dbn.initial
    names = init.names
    card = init.card
    out = {}
    slices = [list(itertools.product(*(range(card[n]) for n in names)))] * horizon
    for traj in itertools.product(*slices):
        prob = 1.0
        prev = None
        for t, y in enumerate(traj):
            cur = dict(zip(names, y))
            for n in names:
                if t == 0:
                    config = tuple(cur[p] for p in init.parents.get(n, ()))
                    prob *= init.cpts[n][config][cur[n]]
                else:
                    config = tuple(prev[p] for p in dbn.parents.get(n, ()))
                    prob *= dbn.cpts[n][config][cur[n]]
            prev = cur
        # atom coordinates are variable-major: Y1@1..Y1@T, Y2@1..
        key = tuple(traj[t][v] for v in range(len(names)) for t in range(horizon))
        out[key] = prob
    return out


@pytest.fixture(scope="session")
def ex1_file():
    return load_model(fixture_path("medical_bn.json"))


@pytest.fixture(scope="session")
def ex1(ex1_file):
    return ex1_file.compile()


@pytest.fixture(scope="session")
def ex2(ex2_file):
    return ex2_file.compile()


@pytest.fixture(scope="session")
def ex2_file():
    return load_model(fixture_path("medical_csbn.json"))


@pytest.fixture(scope="session")
def dbn_file():
    return load_model(fixture_path("medical_dbn.json"))


@pytest.fixture(scope="session")
def dbn(dbn_file):
    return dbn_file.compile()


@pytest.fixture(scope="session")
def dbn8():
    return load_model(fixture_path("medical_dbn_csi.json")).compile()


@pytest.fixture(scope="session")
def ex10_file():
    return load_model(fixture_path("shared_block_csbn.json"))


@pytest.fixture(scope="session")
def ex10(ex10_file):
    return ex10_file.compile()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
