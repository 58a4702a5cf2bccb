from pathlib import Path

import numpy as np
import pytest

from invlab import (
    BoundaryRegion,
    CapabilitySchedule,
    ControlChannel,
    Drift,
    DriftBound,
    EndogenousChannel,
    Numerics,
    Policy,
    SafeSet,
    Scenario,
    StatePartition,
)
from invlab.document import load_validate

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def ball_scenario(
    dim=1,
    kappa=None,
    u_max=1.0,
    mf=0.0,
    policy=None,
    x0=None,
    horizon=10.0,
    dt=1e-3,
    drift=None,
    h_kind="linear-gain",
    h_params=None,
    B=None,
    suite=(),
    candidates=(),
    gamma=None,
    n_env=None,
    **extra,
):
    """Unit ball around the origin with G = I and, by default, B = I."""
    kappa = kappa if kappa is not None else CapabilitySchedule.linear(0.0, 1.0)
    B = np.eye(dim) if B is None else B
    x0 = np.full(dim, 0.5 / np.sqrt(dim)) if x0 is None else x0
    return Scenario(
        partition=StatePartition(dim, dim if n_env is None else n_env),
        safe_set=SafeSet.ball(np.zeros(dim), 1.0),
        drift=drift or Drift.zero(dim),
        control=ControlChannel(B),
        u_max=u_max,
        endogenous=EndogenousChannel(np.eye(dim), h_kind, h_params or {}),
        capability=kappa,
        policy=policy or Policy.zero(u_max),
        initial_state=np.asarray(x0, dtype=float),
        gamma=gamma or BoundaryRegion(),
        numerics=Numerics(dt=dt, horizon=horizon, seed=1234),
        drift_bound=DriftBound.declared(mf) if mf is not None else None,
        suite=tuple(suite),
        a3_candidates=tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in candidates),
        **extra,
    )


@pytest.fixture
def scenario_dir():
    return SCENARIOS


@pytest.fixture(scope="session")
def r1d_doc():
    return load_validate(SCENARIOS / "r1d.scenario")


@pytest.fixture(scope="session")
def r1d(r1d_doc):
    return r1d_doc.build()


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or report.failed:
        prev = _CRITERIA.get(marker, True)
        _CRITERIA[marker] = prev and report.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), ok in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title}")
