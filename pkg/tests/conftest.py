import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src" / "py"))

from carrier.field import CarrierField, CarrierParams, CutoffParams  # noqa: E402
from channel import ChannelGeometry  # noqa: E402
from mesh_builder import build_mesh  # noqa: E402
from problem import ChannelProblem  # noqa: E402


@pytest.fixture
def straight_geometry() -> ChannelGeometry:
    return ChannelGeometry(amplitude=0.0, straight_from=0.0)


@pytest.fixture
def bump_geometry() -> ChannelGeometry:
    return ChannelGeometry(amplitude=0.2, straight_from=1.5)


@pytest.fixture
def straight_mesh(straight_geometry):
    return build_mesh(straight_geometry, 3.0, 0.25)


@pytest.fixture
def bump_mesh(bump_geometry):
    return build_mesh(bump_geometry, 4.0, 0.25)


@pytest.fixture
def bump_params(bump_geometry) -> CarrierParams:
    return CarrierParams(
        flux=0.25, cutoffs=CutoffParams(epsilon=0.3, dist=2.0), geometry=bump_geometry
    )


@pytest.fixture
def straight_problem(straight_mesh) -> ChannelProblem:
    return ChannelProblem(straight_mesh)


@pytest.fixture
def bump_problem(bump_mesh, bump_params) -> ChannelProblem:
    return ChannelProblem(bump_mesh, CarrierField(bump_params))
