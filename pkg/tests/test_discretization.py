import math

import numpy as np
import pytest
import scipy.sparse as sp

from carrier.field import CarrierField, CarrierParams, CutoffParams
from channel import wall_normals
from constants import TAG_WALL_LOWER, TAG_WALL_UPPER
from errors import FormSelectionError
from fem.assembly import FormAssembler, assemble_system
from fem.manufactured import SlipManufacturedSolution, convergence_study, observed_orders
from fem.norms import evaluate_norms
from fem.quadrature import composite_rule, gauss_legendre, triangle_rule
from fem.saddle import SaddleSolver
from fem.spaces import NodeKind, build_spaces
from mesh import slab_submesh
from mesh_builder import build_mesh
from problem import ChannelProblem


@pytest.mark.parametrize("degree", [1, 2, 4, 6, 8])
def test_triangle_rule_exactness(degree):
    rule = triangle_rule(degree)
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert (x**a * y**b) @ rule.weights == pytest.approx(exact, rel=1e-12)
    assert np.all(rule.weights > 0.0)


def test_composite_rule_area():
    assert composite_rule(4, 2).weights.sum() == pytest.approx(0.5, rel=1e-14)


def test_gauss_legendre_interval():
    x, w = gauss_legendre(5, 1.0, 3.0)
    assert w.sum() == pytest.approx(2.0)
    assert (x**9) @ w == pytest.approx((3.0**10 - 1.0) / 10.0, rel=1e-12)


def test_prolongation_is_orthonormal(bump_mesh):
    layout = build_spaces(bump_mesh)
    P = layout.prolongation
    gram = (P.T @ P).toarray()
    np.testing.assert_allclose(gram, np.eye(layout.n_free), atol=1e-14)


def test_constrained_fields_slip_and_vanish_at_ends(bump_mesh):
    layout = build_spaces(bump_mesh)
    v = layout.expand(np.random.default_rng(1).standard_normal(layout.n_free)).reshape(-1, 2)
    wall = layout.node_kind == NodeKind.WALL
    end = layout.node_kind == NodeKind.END
    np.testing.assert_allclose(np.sum(v[wall] * layout.normals[wall], axis=1), 0.0, atol=1e-13)
    assert np.all(v[end] == 0.0)


def test_wall_frames_follow_the_chords(straight_mesh, bump_mesh):
    flat = build_spaces(straight_mesh)
    wall = flat.node_kind == NodeKind.WALL
    np.testing.assert_allclose(np.abs(flat.normals[wall]), [[0.0, 1.0]] * int(wall.sum()), atol=1e-15)
    np.testing.assert_allclose(flat.tangents[wall], [[1.0, 0.0]] * int(wall.sum()), atol=1e-15)

    layout = build_spaces(bump_mesh)
    wall = layout.node_kind == NodeKind.WALL
    np.testing.assert_allclose(np.linalg.norm(layout.normals[wall], axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(np.sum(layout.normals[wall] * layout.tangents[wall], axis=1), 0.0, atol=1e-14)
    assert np.all(layout.tangents[wall, 0] > 0.0)
    edges = bump_mesh.boundary_edges(TAG_WALL_UPPER)
    chord = np.diff(bump_mesh.nodes[bump_mesh.edges[edges]], axis=1)[:, 0]
    chord /= np.linalg.norm(chord, axis=1)[:, None]
    midpoints = bump_mesh.n_vertices + edges
    np.testing.assert_allclose(np.abs(np.sum(layout.tangents[midpoints] * chord, axis=1)), 1.0, atol=1e-14)


def test_wall_frames_approach_the_analytic_normals(bump_geometry):
    errors = []
    for h in (0.25, 0.125):
        layout = build_spaces(build_mesh(bump_geometry, 4.0, h))
        tags = np.concatenate([layout.mesh.node_tags, layout.mesh.edge_tags])
        worst = 0.0
        for tag, upper in ((TAG_WALL_UPPER, True), (TAG_WALL_LOWER, False)):
            nodes = (layout.node_kind == NodeKind.WALL) & (tags == tag)
            exact = wall_normals(bump_geometry, layout.node_coords[nodes, 0], upper)
            worst = max(worst, float(np.abs(layout.normals[nodes] - exact).max()))
        errors.append(worst)
    assert 0.0 < errors[1] <= 0.4 * errors[0]


def test_divergence_annihilates_constants_on_curved_walls(bump_problem):
    B = bump_problem.divergence
    column_sums = B.T @ np.ones(B.shape[0])
    assert np.abs(column_sums).max() <= 1e-13 * abs(B).max()


def test_no_slip_layout_drops_walls(straight_mesh):
    slip = build_spaces(straight_mesh)
    no_slip = build_spaces(straight_mesh, dirichlet_walls=True)
    walls = int(np.sum(slip.node_kind == NodeKind.WALL))
    assert slip.n_free - no_slip.n_free == walls


def test_form_symmetry_and_kernels(bump_mesh):
    layout = build_spaces(bump_mesh)
    assembler = FormAssembler(layout)
    viscous, gradient = assembler.viscous(), assembler.gradient()
    assert viscous.symmetry_defect() < 1e-12
    assert gradient.symmetry_defect() < 1e-12

    x, y = layout.node_coords[:, 0], layout.node_coords[:, 1]
    translation = np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1).ravel()
    rotation = np.stack([-y, x], axis=-1).ravel()
    scale = abs(viscous.matrix).max()
    assert np.max(np.abs(gradient.matrix @ translation)) < 1e-10 * scale
    assert np.max(np.abs(viscous.matrix @ rotation)) < 1e-10 * scale


def test_divergence_of_linear_field(bump_mesh):
    layout = build_spaces(bump_mesh)
    assembler = FormAssembler(layout)
    m = assembler.pressure_mass()
    assert m.sum() == pytest.approx(bump_mesh.total_area(), rel=1e-12)
    x = layout.node_coords[:, 0]
    stretch = np.stack([x, np.zeros_like(x)], axis=-1).ravel()
    np.testing.assert_allclose(assembler.divergence().matrix @ stretch, -m, atol=1e-12)


def test_form_selection_errors(straight_mesh):
    layout = build_spaces(straight_mesh)
    with pytest.raises(FormSelectionError, match="unknown"):
        assemble_system(layout, None, "laplacian")
    with pytest.raises(FormSelectionError, match="frozen"):
        assemble_system(layout, None, "convection")
    with pytest.raises(FormSelectionError):
        assemble_system(layout, None, "body_force")


def test_zero_load_gives_zero_solution(straight_problem):
    solver = straight_problem.stokes_solver()
    v, p, residual = solver.solve(np.zeros(straight_problem.layout.n_free))
    assert not np.any(v) and not np.any(p)
    assert residual == 0.0
    assert isinstance(straight_problem.viscous, sp.csr_matrix)


def test_saddle_solution_is_discretely_solenoidal(straight_mesh, straight_geometry):
    params = CarrierParams(flux=1.0, cutoffs=CutoffParams(epsilon=0.3, dist=1.0), geometry=straight_geometry)
    problem = ChannelProblem(straight_mesh, CarrierField(params))
    load = problem.carrier_load
    solver = SaddleSolver(problem.viscous, problem.divergence, problem.pressure_mass)
    v, p, residual = solver.solve(load)
    assert residual < 1e-10
    # the gauge multiplier vanishes and B v = 0 holds exactly
    assert np.linalg.norm(problem.divergence @ v) < 1e-10 * np.linalg.norm(load)
    assert abs(problem.pressure_mass @ p) < 1e-12 * max(1.0, np.abs(p).max())


def test_saddle_solution_is_solenoidal_on_curved_walls(bump_problem):
    load = bump_problem.carrier_load
    solver = SaddleSolver(bump_problem.viscous, bump_problem.divergence, bump_problem.pressure_mass)
    v, _, residual = solver.solve(load)
    assert residual < 1e-10
    assert np.linalg.norm(bump_problem.divergence @ v) <= 1e-10 * np.linalg.norm(load)


def test_manufactured_solution_is_admissible():
    exact = SlipManufacturedSolution(1.5)
    x1 = np.linspace(-1.5, 1.5, 31)
    for x2 in (-1.0, 1.0):
        points = np.stack([x1, np.full(x1.shape, x2)], axis=-1)
        values, grads = exact.velocity(points)
        np.testing.assert_allclose(values[:, 1], 0.0, atol=1e-14)
        np.testing.assert_allclose(grads[:, 0, 1] + grads[:, 1, 0], 0.0, atol=1e-13)
    inner = np.random.default_rng(0).uniform([-1.5, -1.0], [1.5, 1.0], (50, 2))
    _, grads = exact.velocity(inner)
    np.testing.assert_allclose(grads[:, 0, 0] + grads[:, 1, 1], 0.0, atol=1e-14)


def test_observed_orders():
    orders = observed_orders([0.2, 0.1, 0.05], [4.0, 1.0, 0.25])
    assert math.isnan(orders[0])
    assert orders[1:] == pytest.approx([2.0, 2.0])


def test_convergence_study_needs_decreasing_sizes():
    with pytest.raises(ValueError):
        convergence_study([0.25])
    with pytest.raises(ValueError):
        convergence_study([0.125, 0.25])


@pytest.mark.slow
def test_manufactured_convergence_orders():
    rows = convergence_study()
    finest = rows[-1]
    assert 1.7 <= finest.velocity_order <= 2.3
    assert 1.5 <= finest.pressure_order <= 2.5
    assert rows[0].velocity_h1_error > rows[1].velocity_h1_error > finest.velocity_h1_error


def parabolic(points):
    x2 = points[:, 1]
    values = np.stack([1.0 - x2**2, np.zeros_like(x2)], axis=-1)
    grads = np.zeros((x2.size, 2, 2))
    grads[:, 0, 1] = -2.0 * x2
    return values, grads


def test_evaluate_norms_of_analytic_field(straight_mesh):
    table = evaluate_norms(parabolic, straight_mesh, stations=[0.0, 1.3])
    assert table.l2 == pytest.approx(math.sqrt(6.0 * 16.0 / 15.0), rel=1e-10)
    assert table.grad == pytest.approx(4.0, rel=1e-10)
    assert table.strain == pytest.approx(math.sqrt(8.0), rel=1e-10)
    assert table.divergence == 0.0
    assert table.h1 == pytest.approx(math.hypot(table.l2, 4.0))
    assert list(table.fluxes.values()) == pytest.approx([4.0 / 3.0, 4.0 / 3.0], rel=1e-10)


def test_evaluate_norms_on_slab(straight_mesh):
    table = evaluate_norms(parabolic, straight_mesh, region=slab_submesh(straight_mesh, 0.3, 1.3))
    assert table.grad == pytest.approx(math.sqrt(16.0 / 6.0), rel=1e-10)


def test_projection_enforces_constraints(straight_mesh):
    layout = build_spaces(straight_mesh)

    def field(x):
        return np.stack([1.0 + 0.0 * x[:, 0], x[:, 1]], axis=-1)

    full = layout.interpolate(field)
    projected = layout.project(full).reshape(-1, 2)
    kinds = layout.node_kind
    wall, end = kinds == NodeKind.WALL, kinds == NodeKind.END
    interior = kinds == NodeKind.INTERIOR
    np.testing.assert_allclose(projected[wall], np.column_stack([np.ones(wall.sum()), np.zeros(wall.sum())]), atol=1e-14)
    assert np.all(projected[end] == 0.0)
    np.testing.assert_allclose(projected[interior], full.reshape(-1, 2)[interior], atol=1e-14)
    np.testing.assert_allclose(layout.project(layout.project(full)), layout.project(full), atol=1e-14)


def test_column_flux_of_parabolic_field(straight_problem):
    full = straight_problem.layout.interpolate(lambda x: parabolic(x)[0])
    for c in (-2.0, 0.0, 0.25, 2.75):
        assert straight_problem.station_flux(full, c) == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_column_flux_vanishes_for_solenoidal_fields(bump_problem):
    solver = SaddleSolver(bump_problem.viscous, bump_problem.divergence, bump_problem.pressure_mass)
    v, _, _ = solver.solve(bump_problem.carrier_load)
    full = bump_problem.layout.expand(v)
    scale = np.abs(full).max()
    assert scale > 0.0
    for c in np.linspace(-3.5, 3.5, 15):
        assert abs(bump_problem.station_flux(full, c)) <= 1e-10 * scale
