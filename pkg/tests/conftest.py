import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reftraj import data_path
from reftraj.arm import BoxObstacle, KinematicChain, WorldModel, load_world
from reftraj.env import TaskSpec

# fixtures used with @given are read-only, so sharing them across examples is safe
settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")


def planar_chain(n=2, length=0.5, speed=1.0, spheres=True):
    offsets = [[length, 0, 0]] * n
    links, offs, radii = [], [], []
    if spheres:
        for j in range(n):
            for t in np.linspace(0.2, 1.0, 4):
                links.append(j)
                offs.append([t * length, 0, 0])
                radii.append(0.03)
    return KinematicChain(
        axes=[[0, 0, 1]] * n,
        offsets=offsets,
        lower=[-np.pi] * n,
        upper=[np.pi] * n,
        max_speed=[speed] * n,
        sphere_link=links,
        sphere_offset=np.reshape(offs, (-1, 3)),
        sphere_radius=radii,
    )


@pytest.fixture
def planar2():
    return planar_chain(2)


@pytest.fixture
def empty_world(planar2):
    return WorldModel(planar2, [], "empty")


@pytest.fixture
def box_world(planar2):
    return WorldModel(planar2, [BoxObstacle([0.7, 0.0, 0.0], [0.05, 0.05, 0.2])], "box")


@pytest.fixture(scope="session")
def bookshelf():
    return load_world(str(data_path("worlds", "bookshelf.json")))


@pytest.fixture(scope="session")
def toy_world():
    return load_world(str(data_path("worlds", "toy-planar.json")))


@pytest.fixture
def empty_task(empty_world):
    return TaskSpec(empty_world, [0.0, 0.0], [1.0, 0.5], dt=0.05, max_steps=100)


# acceptance reporting: tests marked ``acceptance(n)`` get one PASS/FAIL line in the terminal summary
_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    detail = dict(item.user_properties).get("detail", "")
    n = marker.args[0]
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    if n not in _ACCEPTANCE or status != "PASS":
        _ACCEPTANCE[n] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"ACCEPTANCE {n:2d}: {status}  {detail}")
