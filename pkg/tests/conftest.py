import importlib.resources
import os

import pytest

from agentkernel import browse

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORE_SUITE_DIR = os.path.join(REPO_ROOT, "suites", "core")


def fixture_path(name: str) -> str:
    return str(importlib.resources.files("agentkernel") / "browse" / "fixtures" / name)


@pytest.fixture
def core_suite_dir():
    return CORE_SUITE_DIR


@pytest.fixture(name="fixture_path")
def fixture_path_fixture():
    return fixture_path


@pytest.fixture
def ultimate_answer_state():
    return browse.load_site(fixture_path("ultimate_answer.json"))
