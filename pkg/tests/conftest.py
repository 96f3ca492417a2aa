import pytest

from sliceserve.profiles import ProfileSet, builtin_profile, builtin_profile_path

_ACCEPTANCE = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _ACCEPTANCE.append((number, item.name, title, outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, title, outcome in sorted(_ACCEPTANCE, key=lambda r: (str(r[0]), r[1])):
        terminalreporter.write_line(f"[{outcome}] criterion {number}: {title} ({name})")


@pytest.fixture(scope="session")
def xray():
    return builtin_profile("xray")


@pytest.fixture(scope="session")
def xray_path():
    return builtin_profile_path("xray")


@pytest.fixture(scope="session")
def four_models():
    """Four sub-models whose per-mini-batch times are 6, 4, 2 and 1 seconds."""
    return ProfileSet.from_tuples(
        [(1.0, 0.90, 6000.0), (0.75, 0.85, 4000.0), (0.5, 0.74, 2000.0), (0.25, 0.70, 1000.0)],
        name="four-models",
    )
