from __future__ import annotations

import pytest

from processors.fixtures import load_fixture
from processors.instance_loader import LoadedInstance
from services.solver import SolverOptions


@pytest.fixture
def tiny8() -> LoadedInstance:
    return load_fixture("tiny8")


@pytest.fixture
def fig5_standard() -> LoadedInstance:
    return load_fixture("fig5-standard")


@pytest.fixture
def fig5_skip() -> LoadedInstance:
    return load_fixture("fig5-skip")


@pytest.fixture
def fast_opts() -> SolverOptions:
    return SolverOptions(time_limit=120.0, engine="branch_and_bound")
