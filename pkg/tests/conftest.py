from pathlib import Path

import pytest

from loopgate.planner import TaskBundle, bundled_task

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture
def drawer_bundle() -> TaskBundle:
    return bundled_task("open_drawer")


@pytest.fixture
def sponge_bundle() -> TaskBundle:
    return bundled_task("sponge_in_drawer")


@pytest.fixture
def mouse_bundle() -> TaskBundle:
    return bundled_task("pick_place_mouse")


@pytest.fixture
def sponge_task(sponge_bundle):
    return sponge_bundle.task


@pytest.fixture
def drawer_task(drawer_bundle):
    return drawer_bundle.task
