import dataclasses

import pytest

from lockstep import parse_config
from lockstep.cli import _resolve_relative_paths, fixture_path


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if rep.when == "call" and marker is not None:
        num, desc = marker.args
        status = "PASS" if rep.passed else "FAIL"
        print(f"\n[criterion {num:2d}] {status}: {desc}")


def load_fixture_config(name: str, timeout: int | None = None):
    path = fixture_path(name)
    cfg = parse_config(path.read_bytes())
    cfg = _resolve_relative_paths(cfg, path.parent)
    if timeout is not None:
        cfg = dataclasses.replace(cfg, simulation_timeout=timeout)
    return cfg


@pytest.fixture
def demo_control_cfg():
    return load_fixture_config("demo_control_only.json")


@pytest.fixture
def demo_full_cfg():
    return load_fixture_config("demo_full.json")


@pytest.fixture
def straight_course(tmp_path):
    """Trajectory CSV running straight along +x, one waypoint per meter."""
    rows = ["x,y"] + [f"{float(i)},0.0" for i in range(1, 21)]
    path = tmp_path / "straight.csv"
    path.write_text("\n".join(rows) + "\n")
    return path
