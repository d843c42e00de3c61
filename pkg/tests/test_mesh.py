import numpy as np
import pytest

from channel import ChannelGeometry, eval_walls
from constants import TAG_END_LEFT, TAG_END_RIGHT
from errors import DomainTooShortError, GeometryError, InvalidIntervalError
from mesh import cut_points, slab_submesh, split_unit_slabs, station_points
from mesh_builder import MeshBuilder, build_mesh, build_slab_mesh


def test_straight_mesh_resolution(straight_mesh):
    assert straight_mesh.nx == 24
    assert straight_mesh.ny == 8
    assert straight_mesh.n_vertices == 25 * 9
    assert straight_mesh.n_cells == 2 * 24 * 8
    assert straight_mesh.euler_characteristic() == 1


def test_straight_mesh_area_and_tags(straight_mesh):
    assert straight_mesh.total_area() == pytest.approx(12.0, rel=1e-13)
    assert straight_mesh.has_end_tags()
    assert straight_mesh.tag_summary() == {"wall_lower": 24, "wall_upper": 24, "end_left": 8, "end_right": 8}
    assert np.all(straight_mesh.dets > 0.0)


def test_bump_mesh_area(bump_mesh):
    # 4T plus 2a times the integral of the quintic bump (= L)
    assert bump_mesh.total_area() == pytest.approx(16.0 + 2.0 * 0.2 * 1.5, abs=2e-2)


def test_wall_nodes_sit_on_walls(bump_mesh, bump_geometry):
    grid = bump_mesh.nodes.reshape(bump_mesh.nx + 1, bump_mesh.ny + 1, 2)
    jet = eval_walls(bump_geometry, bump_mesh.x_lines)
    np.testing.assert_array_equal(grid[:, -1, 1], jet.f2)
    np.testing.assert_array_equal(grid[:, 0, 1], jet.f1)


def test_end_node_tags(straight_mesh):
    grid = straight_mesh.node_tags.reshape(straight_mesh.nx + 1, straight_mesh.ny + 1)
    assert np.all(grid[0] == TAG_END_LEFT)
    assert np.all(grid[-1] == TAG_END_RIGHT)


def test_domain_too_short(bump_geometry):
    with pytest.raises(DomainTooShortError, match="T >= L \\+ 1"):
        build_mesh(bump_geometry, 2.0, 0.25)


def test_degenerate_geometry_rejected():
    geom = ChannelGeometry(amplitude=-0.6, straight_from=1.0)
    with pytest.raises(GeometryError):
        build_mesh(geom, 3.0, 0.25)


def test_invalid_build_range(straight_geometry):
    builder = MeshBuilder(straight_geometry)
    with pytest.raises(InvalidIntervalError):
        builder.build(1.0, 1.0, 0.25)
    with pytest.raises(InvalidIntervalError):
        builder.build(-1.0, 1.0, 0.0)


def test_slab_submesh_errors(straight_mesh):
    with pytest.raises(InvalidIntervalError):
        slab_submesh(straight_mesh, 1.0, 1.0)
    with pytest.raises(InvalidIntervalError):
        slab_submesh(straight_mesh, -4.0, 0.0)


def test_exact_slab_area(bump_mesh):
    slab = slab_submesh(bump_mesh, 2.1, 3.37)
    # walls are flat beyond L = 1.5
    assert slab.area() == pytest.approx(2.0 * 1.27, rel=1e-12)
    assert cut_points(bump_mesh, 2.1, 3.37, 2).weights.sum() == pytest.approx(2.54, rel=1e-12)


def test_split_unit_slabs(straight_mesh):
    slabs = split_unit_slabs(straight_mesh, -2.5, 0.0)
    assert len(slabs) == 3
    assert slabs[0].a == -2.5 and slabs[-1].b == 0.0
    assert all(0.5 <= s.width <= 1.0 for s in slabs)


def test_station_points_measure_width(bump_mesh):
    for c in (-4.0, -2.0, 2.0, 4.0):
        assert station_points(bump_mesh, c).weights.sum() == pytest.approx(2.0, rel=1e-12)
    # x1 = 0 is a column line, so the chord heights are exact there
    assert station_points(bump_mesh, 0.0).weights.sum() == pytest.approx(2.4, rel=1e-12)


def test_locate_recovers_points(bump_mesh):
    rng = np.random.default_rng(3)
    x1 = rng.uniform(-3.9, 3.9, 200)
    x2 = rng.uniform(-0.95, 0.95, 200)
    points = np.stack([x1, x2], axis=-1)
    cells, ref = bump_mesh.locate(points)
    lam = np.stack([ref[:, 0], ref[:, 1], 1.0 - ref[:, 0] - ref[:, 1]], axis=-1)
    assert lam.min() >= -1e-12
    np.testing.assert_allclose(bump_mesh.to_physical(cells, ref), points, atol=1e-12)


def test_slab_mesh_has_end_tags(straight_geometry):
    slab = build_slab_mesh(straight_geometry, -0.5, 0.5, 0.25)
    assert slab.has_end_tags()
    assert slab.total_area() == pytest.approx(2.0, rel=1e-13)


def test_nearest_column_stays_inside(straight_mesh):
    assert straight_mesh.nearest_column(0.0) == 12
    assert straight_mesh.nearest_column(0.1) == 12
    assert straight_mesh.nearest_column(0.2) == 13
    assert straight_mesh.nearest_column(-3.0) == 1
    assert straight_mesh.nearest_column(3.0) == straight_mesh.nx - 1
    columns = straight_mesh.vertex_columns()
    np.testing.assert_allclose(straight_mesh.nodes[:, 0], straight_mesh.x_lines[columns])
