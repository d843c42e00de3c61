import math
from pathlib import Path

import numpy as np
import pytest

from analysis.inequalities import (
    DivergenceSolver,
    bogovskii_bound,
    embedding_bound,
    flux_stations,
    korn_constant,
    mean_zero_battery,
    mesh_constants,
    poincare_constant,
)
from carrier.field import CarrierField
from carrier.smallness import certification_sweep, random_solenoidal_fields, smallness_ratio
from config import load_config
from errors import DegenerateInputError, PreconditionError
from fem.spaces import NodeKind
from mesh_builder import build_mesh, build_slab_mesh
from problem import ChannelProblem
from utils import make_rng


@pytest.fixture
def slab_mesh(straight_geometry):
    return build_slab_mesh(straight_geometry, -0.5, 0.5, 0.25)


def test_flux_stations_cover_every_column(straight_mesh):
    stations = flux_stations(straight_mesh)
    assert stations.size == (straight_mesh.nx - 1) + 2 * straight_mesh.nx
    assert np.all(np.diff(stations) > 0.0)
    assert stations[0] > straight_mesh.x_min and stations[-1] < straight_mesh.x_max


def test_korn_constant_is_one_on_straight_channel(straight_problem):
    assert korn_constant(straight_problem) == pytest.approx(1.0, abs=1e-6)


def test_korn_constant_range_on_bump(bump_mesh):
    korn_c = korn_constant(ChannelProblem(bump_mesh))
    assert 0.0 < korn_c <= 1.0 + 1e-8


@pytest.mark.slow
def test_korn_constant_is_stable_under_refinement(bump_geometry):
    coarse = mesh_constants(bump_geometry, 4.0, 0.25)
    fine = mesh_constants(bump_geometry, 4.0, 0.125)
    assert 0.0 < fine.korn <= 1.0 + 1e-8
    assert abs(fine.korn - coarse.korn) <= 0.02 * coarse.korn


def test_mesh_constants_are_solved_once(straight_geometry):
    mesh_constants.cache_clear()
    first = mesh_constants(straight_geometry, 3.0, 0.25)
    again = mesh_constants(straight_geometry, 3.0, 0.25)
    assert again is first
    assert mesh_constants.cache_info().hits == 1
    assert first.korn == pytest.approx(1.0, abs=1e-6)
    assert first.a_priori == pytest.approx(2.0 * (1.0 + first.poincare**2) / first.korn)


def test_poincare_constant_straight_channel(straight_problem):
    T = straight_problem.mesh.half_length
    expected = 2.0 / (math.pi * math.sqrt(1.0 + 1.0 / T**2))
    assert poincare_constant(straight_problem) == pytest.approx(expected, rel=1e-2)


def test_random_fields_are_normalized(straight_problem):
    fields = random_solenoidal_fields(straight_problem, 3, make_rng(0, 1))
    assert len(fields) == 3
    for v in fields:
        assert v @ (straight_problem.gradient @ v) == pytest.approx(1.0, rel=1e-10)


def test_random_fields_are_reproducible(straight_problem):
    a = random_solenoidal_fields(straight_problem, 2, make_rng(4, 7))
    b = random_solenoidal_fields(straight_problem, 2, make_rng(4, 7))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


def test_random_fields_need_a_count(straight_problem):
    with pytest.raises(DegenerateInputError):
        random_solenoidal_fields(straight_problem, 0, make_rng(0))


def test_embedding_bound_is_scale_invariant(straight_problem):
    fields = random_solenoidal_fields(straight_problem, 1, make_rng(2))
    once = embedding_bound(straight_problem, fields, ascent_steps=0)
    scaled = embedding_bound(straight_problem, [3.0 * fields[0]], ascent_steps=0)
    assert once > 0.0
    assert scaled == pytest.approx(once, rel=1e-10)
    assert embedding_bound(straight_problem, fields, ascent_steps=5) >= once


def test_embedding_bound_rejects_zero_fields(straight_problem):
    with pytest.raises(DegenerateInputError):
        embedding_bound(straight_problem, [np.zeros(straight_problem.layout.n_free)])


def test_divergence_solver_zero_right_hand_side(slab_mesh):
    solution, ratio = bogovskii_bound(slab_mesh, lambda p: np.zeros(p.shape[0]))
    assert ratio == 0.0
    assert not np.any(solution.field)


def test_divergence_solver_needs_zero_mean(slab_mesh):
    with pytest.raises(PreconditionError, match="mean-zero"):
        bogovskii_bound(slab_mesh, lambda p: np.ones(p.shape[0]))


def test_divergence_battery(slab_mesh):
    solver = DivergenceSolver(slab_mesh)
    for name, f in mean_zero_battery(slab_mesh):
        solution = solver.solve(f)
        assert solution.residual <= 1e-8, name
        assert solution.ratio > 0.0, name
    _, m5 = bogovskii_bound(slab_mesh)
    assert m5 > 0.0


def test_divergence_solution_vanishes_on_boundary(slab_mesh):
    battery = dict(mean_zero_battery(slab_mesh))
    solution, _ = bogovskii_bound(slab_mesh, battery["odd_bump"])
    values = solution.field.reshape(-1, 2)
    boundary = solution.layout.node_kind != NodeKind.INTERIOR
    assert np.all(values[boundary] == 0.0)


def test_smallness_ratio_of_zero_field(bump_problem):
    with pytest.raises(DegenerateInputError):
        smallness_ratio(bump_problem, np.zeros(bump_problem.layout.n_free))


def test_smallness_ratio_scales_with_flux(bump_mesh, bump_params):
    base = ChannelProblem(bump_mesh)
    v = random_solenoidal_fields(base, 1, make_rng(5))[0]
    one = ChannelProblem(bump_mesh, CarrierField(bump_params), layout=base.layout)
    two = ChannelProblem(bump_mesh, CarrierField(bump_params.with_flux(0.5)), layout=base.layout)
    assert smallness_ratio(two, v) == pytest.approx(2.0 * smallness_ratio(one, v), rel=1e-10)


def test_certification_sweep_skips_invalid_points(bump_mesh):
    result = certification_sweep(bump_mesh, 0.25, epsilons=[0.6], dists=[2.0], korn_c=1.0, samples=2)
    assert result.rows == []
    assert len(result.skipped) == 1
    assert not result.certified


@pytest.mark.slow
def test_certification_at_unit_flux():
    config = load_config(Path(__file__).resolve().parents[1] / "configs" / "certify.ini")
    mesh = build_mesh(config.geometry, config.mesh.half_length, config.mesh.h)
    korn_c = mesh_constants(config.geometry, config.mesh.half_length, config.mesh.h).korn
    result = certification_sweep(mesh, 1.0, [0.2, 0.1], [6.0, 12.0], korn_c, samples=10)
    assert result.certified
    assert result.ratio_at(*result.chosen) <= 0.5 * korn_c
    assert result.ratio_at(0.1, 12.0) < result.ratio_at(0.2, 6.0)
