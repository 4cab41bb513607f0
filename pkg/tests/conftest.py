import numpy as np
import pytest

from t3s2s import default_scene_path, load_scene, scenes_dir

SCENE_PROMPT = (
    "Isometric view of game scene, a plain, walk path, a river, a high mountain, houses."
)


@pytest.fixture(scope="session")
def default_scene():
    return load_scene(default_scene_path())


@pytest.fixture(scope="session")
def corpus_paths():
    return sorted(scenes_dir().glob("scene_*.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    failed = rep.failed or (rep.when == "call" and not rep.passed)
    if rep.when == "call" or failed:
        prev = _ACCEPTANCE.get(number, (title, "PASS"))[1]
        _ACCEPTANCE[number] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title}")
