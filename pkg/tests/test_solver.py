import numpy as np
import pytest
from pydantic import ValidationError

from carrier.field import CarrierField, CarrierParams, CutoffParams
from channel import ChannelGeometry
from errors import NonConvergenceError
from fem.saddle import MixedField
from mesh_builder import build_mesh
from problem import ChannelProblem
from solver import ReconstructedFlow, Scheme, SolveOptions, picard_solve, reconstruct_u, weak_residual


def test_options_validation():
    with pytest.raises(ValidationError):
        SolveOptions(damping=0.0)
    with pytest.raises(ValidationError):
        SolveOptions(linear_solver="lu")
    with pytest.raises(ValidationError):
        SolveOptions(max_iters=0)
    assert SolveOptions(scheme="oseen").scheme == Scheme.OSEEN


def test_zero_flux_converges_in_one_step(straight_problem):
    bundle = picard_solve(straight_problem)
    assert bundle.converged
    assert bundle.iterations == 1
    assert not np.any(bundle.field.velocity_free)
    assert bundle.perturbation_h1 == 0.0
    assert bundle.a_priori_quotient == 0.0


def test_iteration_cap_raises_with_partial(bump_problem):
    with pytest.raises(NonConvergenceError) as info:
        picard_solve(bump_problem, SolveOptions(max_iters=1))
    error = info.value
    assert error.exit_code == 2
    assert error.partial is not None
    assert error.partial.iterations == 1
    assert not error.partial.converged
    assert len(error.diagnostics["increments"]) == 1


def test_bad_start_shape(straight_problem):
    with pytest.raises(ValueError, match="start iterate"):
        picard_solve(straight_problem, start=np.zeros(3))


@pytest.fixture(scope="module")
def solved():
    # module scope so the nonlinear solve runs once
    geometry = ChannelGeometry(amplitude=0.2, straight_from=1.5)
    params = CarrierParams(flux=0.25, cutoffs=CutoffParams(epsilon=0.3, dist=2.0), geometry=geometry)
    problem = ChannelProblem(build_mesh(geometry, 4.0, 0.25), CarrierField(params))
    return picard_solve(problem)


def test_converged_solution_has_small_residual(solved):
    assert solved.converged
    assert solved.load_norm > 0.0
    assert weak_residual(solved.problem, solved.field) <= 10.0 * solved.options.picard_tol * solved.load_norm
    assert solved.perturbation_h1 > 0.0


def test_oseen_reaches_the_same_solution(solved):
    oseen = picard_solve(solved.problem, SolveOptions(scheme=Scheme.OSEEN))
    assert oseen.converged
    distance = solved.problem.h1_norm(oseen.field.velocity_free - solved.field.velocity_free)
    assert distance <= 1e-6 * max(1.0, solved.perturbation_h1)


def test_converged_start_stops_immediately(solved):
    again = picard_solve(solved.problem, start=solved.field, start_label="previous")
    assert again.converged
    assert again.iterations <= 2
    assert again.start_label == "previous"


def test_reconstructed_flux(solved):
    stations = [-3.0, 0.0, 2.5]
    flow, norms = reconstruct_u(solved, stations)
    assert isinstance(flow, ReconstructedFlow)
    for c in stations:
        assert abs(norms.fluxes[c] - 0.25) <= 1e-8 * 0.25
    assert max(abs(f) for f in solved.perturbation_fluxes(np.linspace(-3.75, 3.75, 31))) <= 1e-8 * 0.25
    assert norms.h1 >= norms.grad


def test_far_field_deviation_vanishes_past_the_end(solved):
    flow = ReconstructedFlow(solved)
    assert flow.far_field_deviation(4.0) == 0.0
    assert flow.far_field_deviation(1.0) >= flow.far_field_deviation(3.0) >= 0.0


def test_zero_start_field(straight_problem):
    start = MixedField.zeros(straight_problem.layout)
    bundle = picard_solve(straight_problem, start=start.velocity_free, start_label="zero")
    assert bundle.iterations == 1
