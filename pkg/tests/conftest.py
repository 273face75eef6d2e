import copy
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from cyberins.model import fixture_path, load_fixture  # noqa: E402


@pytest.fixture(scope="session")
def three_bus():
    return load_fixture("three_bus")


@pytest.fixture(scope="session")
def rts24():
    return load_fixture("rts24_5tg")


@pytest.fixture
def three_bus_doc():
    """Fresh, mutable copy of the 3-bus document."""
    return copy.deepcopy(yaml.safe_load(fixture_path("three_bus").read_text()))


def write_doc(path, doc):
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.result_lines():
        terminalreporter.write_line(line)
