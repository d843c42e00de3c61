from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from analysis.decay import decay_profile, growth_profile, truncated_energy
from analysis.reports import DecayReport, DecayVerdict, GrowthReport
from carrier.field import CarrierField, CarrierParams, CutoffParams
from channel import ChannelGeometry
from config import load_config
from errors import InvalidGridError
from mesh_builder import build_mesh
from problem import ChannelProblem
from solver import picard_solve

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def zero_bundle(straight_problem):
    return picard_solve(straight_problem)


@pytest.fixture(scope="module")
def bump_bundle():
    geometry = ChannelGeometry(amplitude=0.2, straight_from=1.5)
    params = CarrierParams(flux=0.25, cutoffs=CutoffParams(epsilon=0.3, dist=2.0), geometry=geometry)
    return picard_solve(ChannelProblem(build_mesh(geometry, 4.0, 0.25), CarrierField(params)))


def test_zero_solution_is_exact_zero(zero_bundle):
    report = decay_profile(zero_bundle, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert report.verdict == DecayVerdict.EXACT_ZERO
    assert report.y_plus == [0.0] * 5
    assert all(c.passed for c in report.checks())
    assert report.fitted_rate is None


def test_zero_solution_growth(zero_bundle):
    report = growth_profile(zero_bundle, [1.0, 2.0, 3.0])
    assert report.C6_empirical == 0.0
    assert report.cumulative_grad == [0.0, 0.0, 0.0]
    assert report.attained_inside
    assert all(c.passed for c in report.checks())


@pytest.mark.parametrize("grid", [[2.0, 1.0], [0.5, 1.0], [1.0, 3.5], []])
def test_invalid_grids(zero_bundle, grid):
    with pytest.raises(InvalidGridError):
        decay_profile(zero_bundle, grid)


def test_truncated_energy_is_nonincreasing(bump_bundle):
    t = np.linspace(1.0, 4.0, 13)
    y = [truncated_energy(bump_bundle, s) for s in t]
    assert y[0] > 0.0
    assert np.all(np.diff(y) <= 1e-12 * y[0])


def test_edge_energy_matches_derivative(bump_bundle):
    # 1.3 and 2.6 fall inside cell columns, 4.0 is the end of the channel
    report = decay_profile(bump_bundle, [1.0, 1.3, 2.0, 2.6, 3.0, 4.0])
    assert report.derivative_mismatch() <= 1e-8
    checks = {c.name: c.passed for c in report.checks()}
    assert checks["dy_plus_matches_edge_energy"]
    assert report.monotonicity_defect() <= 1e-12
    # the default window [2d + 1, T - 1] is empty on this short channel
    assert report.verdict == DecayVerdict.INSUFFICIENT


def test_explicit_window_fit(bump_bundle):
    report = decay_profile(bump_bundle, [2.0, 2.5, 3.0, 3.5], window=(2.0, 3.5))
    assert report.verdict in (DecayVerdict.DECAY, DecayVerdict.NO_DECAY)
    if report.verdict == DecayVerdict.DECAY:
        assert report.C4_empirical == pytest.approx(1.0 / report.fitted_rate)
        assert report.C5_empirical >= 0.0


def test_growth_profile_of_solution(bump_bundle):
    report = growth_profile(bump_bundle, [1.0, 2.0, 3.0, 4.0])
    assert np.all(np.diff(report.cumulative_grad) >= 0.0)
    assert report.C6_empirical == pytest.approx(max(report.normalized))
    assert report.argmax_t in report.t_grid
    assert len(report.rows()) == 4


def test_report_lengths_are_validated():
    with pytest.raises(ValidationError, match="y_minus"):
        DecayReport(
            t_grid=[1.0, 2.0],
            y_plus=[1.0, 0.5],
            y_minus=[1.0],
            edge_energy=[0.5, 0.25],
            dy_plus_fd=[-0.5, -0.25],
            fit_window=(1.0, 2.0),
            verdict=DecayVerdict.DECAY,
        )


def test_growth_maximum_at_last_point_is_flagged():
    report = GrowthReport(
        t_grid=[1.0, 2.0],
        slab_h1=[1.0, 1.0],
        slab_l4=[1.0, 1.0],
        cumulative_grad=[1.0, 4.0],
        normalized=[0.5, 4.0 / (1.0 + np.sqrt(2.0))],
        C6_empirical=4.0 / (1.0 + np.sqrt(2.0)),
    )
    assert not report.attained_inside


@pytest.mark.slow
def test_decay_on_short_bump_config():
    config = load_config(CONFIGS / "decay.ini")
    mesh = build_mesh(config.geometry, config.mesh.half_length, config.mesh.h)
    bundle = picard_solve(ChannelProblem(mesh, CarrierField(config.carrier_params)), config.solver)
    assert config.cutoffs.dist == 3.0
    report = decay_profile(bundle, np.arange(1.0, config.mesh.half_length + 1e-9, 0.5))
    assert report.fit_window == (7.0, 11.0)
    assert report.verdict == DecayVerdict.DECAY
    assert report.fitted_rate > 0.0
    assert report.r_squared >= 0.99
    assert report.derivative_mismatch() <= 1e-8
    assert report.monotonicity_defect() <= 1e-12


@pytest.mark.slow
def test_growth_scales_linearly_with_flux(bump_bundle):
    params = bump_bundle.carrier.params.with_flux(0.5)
    stronger = picard_solve(ChannelProblem(bump_bundle.mesh, CarrierField(params), layout=bump_bundle.problem.layout))
    grid = [1.0, 2.0, 3.0, 4.0]
    ratio = growth_profile(stronger, grid).C6_empirical / growth_profile(bump_bundle, grid).C6_empirical
    assert 1.7 <= ratio <= 2.3
