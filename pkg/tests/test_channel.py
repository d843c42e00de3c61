import numpy as np
import pytest
from pydantic import ValidationError

from channel import ChannelGeometry, ProfileFamily, bump, contains, eval_walls, wall_normals, wall_tangents
from errors import GeometryError


def test_bump_endpoints():
    phi, dphi, d2phi = bump(np.array([-1.0, 0.0, 1.0, 2.0]))
    assert phi.tolist() == [0.0, 1.0, 0.0, 0.0]
    assert dphi[1] == 0.0
    assert np.all(d2phi[[0, 2, 3]] == 0.0)


def test_walls_flat_outside_bump(bump_geometry):
    jet = eval_walls(bump_geometry, np.array([-3.0, -1.5, 1.5, 7.0]))
    assert np.all(jet.f1 == -1.0)
    assert np.all(jet.f2 == 1.0)
    for derivative in (jet.df1, jet.df2, jet.d2f1, jet.d2f2):
        assert np.all(derivative == 0.0)


def test_symmetric_bump_widens_channel(bump_geometry):
    jet = eval_walls(bump_geometry, np.array([0.0]))
    assert jet.f2[0] == pytest.approx(1.2)
    assert jet.f1[0] == pytest.approx(-1.2)
    assert bump_geometry.widest_width() == pytest.approx(2.4)
    assert bump_geometry.narrowest_width() == pytest.approx(2.0)


def test_upper_profile_keeps_lower_wall_flat():
    geom = ChannelGeometry(profile=ProfileFamily.UPPER, amplitude=-0.3, straight_from=1.0)
    jet = eval_walls(geom, np.linspace(-1.0, 1.0, 11))
    assert np.all(jet.f1 == -1.0)
    assert jet.f2.min() == pytest.approx(0.7)
    assert geom.narrowest_width() == pytest.approx(1.7)


def test_narrow_channel_rejected():
    geom = ChannelGeometry(amplitude=-0.6, straight_from=1.0)
    with pytest.raises(GeometryError, match="degenerate geometry"):
        geom.check_width()


def test_bump_needs_support():
    with pytest.raises(ValidationError):
        ChannelGeometry(amplitude=0.2, straight_from=0.0)


def test_normals_and_tangents_are_orthonormal(bump_geometry):
    x1 = np.linspace(-2.0, 2.0, 41)
    for upper in (True, False):
        n = wall_normals(bump_geometry, x1, upper)
        tau = wall_tangents(bump_geometry, x1, upper)
        np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0)
        np.testing.assert_allclose(np.sum(n * tau, axis=1), 0.0, atol=1e-15)
    # outward on the upper wall
    assert np.all(wall_normals(bump_geometry, x1, True)[:, 1] > 0.0)


def test_contains(straight_geometry):
    points = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 1.5], [5.0, -1.01]])
    assert contains(straight_geometry, points).tolist() == [True, True, False, False]
