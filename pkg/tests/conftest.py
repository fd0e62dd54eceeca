import json
import sys

import numpy as np
import pytest

from nnreach.network import Activation, Box, Layer, Network, random_network

UNIT_SQUARE = Box([0.0, 0.0], [1.0, 1.0])


def write_net(path, layers):
    path.write_text(json.dumps({"layers": layers}))
    return path


@pytest.fixture
def identity_net():
    return Network((Layer(np.eye(2), np.zeros(2), Activation.LINEAR),))


@pytest.fixture
def identity_relu_net():
    return Network((Layer(np.eye(2), np.zeros(2), Activation.RELU),))


@pytest.fixture
def cancel_net():
    """y = x - x: exact range {0}, IBP gives [-1, 1] on [0, 1]."""
    return Network((
        Layer([[1.0], [1.0]], [0.0, 0.0], Activation.LINEAR),
        Layer([[1.0, -1.0]], [0.0], Activation.LINEAR),
    ))


@pytest.fixture
def net42():
    return random_network([2, 50, 2], "relu", 42)


@pytest.fixture
def unit_square():
    return UNIT_SQUARE


@pytest.fixture
def identity_net_file(tmp_path):
    return write_net(tmp_path / "id.json", [{"weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "linear"}])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
