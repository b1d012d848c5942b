import json
from pathlib import Path

import pytest

from mitm.broker import FIXTURES
from mitm.codec import default_registry
from mitm.graph import load_graph

FIXTURE_DIR = FIXTURES


def load_fixture(name: str):
    return json.loads((FIXTURE_DIR / name).read_text())


@pytest.fixture(scope="session")
def core_graph():
    return load_graph(load_fixture("mitm.json"))


@pytest.fixture(scope="session")
def algebra_graph():
    return load_graph(load_fixture("algebra.json"))


@pytest.fixture(scope="session")
def registry():
    return default_registry()
