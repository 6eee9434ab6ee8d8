"""
Pytest configuration and fixtures.

Isolates the user settings file and provides the bundled design graphs,
the case-control data set and its closed-form maximum-likelihood values.
"""

import pytest

from cmdesign import config
from cmdesign.resources import fixture_path, load_fixture

# Case-control counts (X*, Z*, Y*) -> n among the 2000 measured individuals,
# plus the Y*-only records of the 18000 sampled but not measured.
CASE_CONTROL_COUNTS = {
    (0, 0, 1): 100, (0, 0, 0): 814,
    (1, 0, 1): 47, (1, 0, 0): 5,
    (0, 1, 1): 3, (0, 1, 0): 45,
    (1, 1, 1): 850, (1, 1, 0): 136,
}
UNMEASURED_CASES = 8500
UNMEASURED_CONTROLS = 9500


def closed_form_estimates() -> dict[str, float]:
    """
    Maximum-likelihood estimates of the saturated case-control model.

    The outcome margin comes from all 20000 sampled individuals and the
    exposure distribution within cases and controls from the measured ones.
    """
    cases = sum(n for (_, _, y), n in CASE_CONTROL_COUNTS.items() if y == 1)
    controls = sum(n for (_, _, y), n in CASE_CONTROL_COUNTS.items() if y == 0)
    total = cases + controls + UNMEASURED_CASES + UNMEASURED_CONTROLS
    p_y = {1: (cases + UNMEASURED_CASES) / total}
    p_y[0] = 1.0 - p_y[1]
    joint = {
        (x, z, y): n / (cases if y == 1 else controls) * p_y[y]
        for (x, z, y), n in CASE_CONTROL_COUNTS.items()
    }

    def p(**fixed) -> float:
        keys = ("x", "z", "y")
        return sum(v for k, v in joint.items()
                   if all(k[keys.index(name)] == value for name, value in fixed.items()))

    def p_y1(x: int, z: int) -> float:
        return p(x=x, z=z, y=1) / p(x=x, z=z)

    p_z1 = {x: p(x=x, z=1) / p(x=x) for x in (0, 1)}
    return {
        "theta_X": p(x=1),
        "theta_Z": p_z1[0],
        "theta_ZX": p_z1[1] - p_z1[0],
        "theta_Y": p_y1(0, 0),
        "theta_YX": p_y1(1, 0) - p_y1(0, 0),
        "theta_YZ": p_y1(0, 1) - p_y1(0, 0),
        "theta_YZX": p_y1(1, 1) - p_y1(1, 0) - p_y1(0, 1) + p_y1(0, 0),
        "psi": controls / (controls + UNMEASURED_CONTROLS),
        "psi_Y": cases / (cases + UNMEASURED_CASES)
        - controls / (controls + UNMEASURED_CONTROLS),
    }


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point the settings file at a temporary directory."""
    monkeypatch.setattr(config, "CONFIG_DIR", tmp_path / "config")
    monkeypatch.setattr(config, "SETTINGS_FILE", tmp_path / "config" / "settings.json")
    yield


@pytest.fixture
def fig1a():
    return load_fixture("fig1a")


@pytest.fixture
def fig1b():
    return load_fixture("fig1b")


@pytest.fixture
def fig1c():
    return load_fixture("fig1c")


@pytest.fixture
def morgam():
    return load_fixture("morgam")


@pytest.fixture
def trial():
    return load_fixture("trial")


@pytest.fixture
def nestedcc():
    return load_fixture("nestedcc")


@pytest.fixture
def table1():
    return load_fixture("table1")


@pytest.fixture
def model_path():
    """Path of a bundled model file, for command-line tests."""
    return lambda name: str(fixture_path(name))


@pytest.fixture
def case_control_params():
    """Closed-form estimates with the first-stage sample taking everyone."""
    return {**closed_form_estimates(), "psi_m1": 1.0}


@pytest.fixture
def case_control_rows():
    """Observed (X*, Z*, Y*) rows of the case-control data with their counts."""
    return {
        **CASE_CONTROL_COUNTS,
        (None, None, 1): UNMEASURED_CASES,
        (None, None, 0): UNMEASURED_CONTROLS,
    }
