import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robinlab.geometry import DomainSpec, make_domain  # noqa: E402
from robinlab.mesh import triangulate  # noqa: E402


@pytest.fixture(scope="session")
def disk():
    return make_domain(DomainSpec.disk())


@pytest.fixture(scope="session")
def ellipse():
    return make_domain(DomainSpec.ellipse(2.0, 1.0))


@pytest.fixture(scope="session")
def corrugated():
    return make_domain(DomainSpec.corrugated_strip())


@pytest.fixture(scope="session")
def disk_mesh(disk):
    return triangulate(disk, 0.05)


@pytest.fixture(scope="session")
def disk_mesh_fine(disk):
    return triangulate(disk, 0.03)


@pytest.fixture(scope="session")
def ellipse_mesh(ellipse):
    return triangulate(ellipse, 0.06)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    order = [n for n, _, _ in mod.CRITERIA]
    for num in order:
        if num in mod.RESULTS:
            terminalreporter.write_line(mod.RESULTS[num])
