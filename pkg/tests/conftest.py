from __future__ import annotations

import pytest

from homog2d.experiment import SweepConfig, run_sweep


@pytest.fixture(scope="session")
def sweep_with_trajectories():
    """The shipped sweep (n=256, eps 0.08/0.04/0.02); several minutes, shared by all users."""
    return run_sweep(SweepConfig(), keep_trajectories=True)


@pytest.fixture(scope="session")
def sweep_report(sweep_with_trajectories):
    return sweep_with_trajectories[0]


@pytest.fixture(scope="session")
def reference_trajectory(sweep_with_trajectories):
    return sweep_with_trajectories[1][0.0]
