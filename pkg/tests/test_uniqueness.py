import numpy as np
import pytest

from analysis.reports import FluxBracket, SaintVenantVerdict, UniquenessReport, UniquenessVerdict
from analysis.uniqueness import (
    bracket_flux_threshold,
    cutoff_energy,
    default_starts,
    saint_venant_check,
    multistart_uniqueness,
)
from errors import DegenerateInputError, InvalidGridError, PreconditionError

T_GRID = np.linspace(1.0, 10.0, 10)


def test_saint_venant_trivial():
    result = saint_venant_check(T_GRID, np.zeros_like(T_GRID))
    assert result.verdict == SaintVenantVerdict.TRIVIAL
    assert result.exponent == pytest.approx(3.0)
    assert result.violations == 0


def test_saint_venant_cubic_growth():
    result = saint_venant_check(T_GRID, T_GRID**3, m=1.5)
    assert result.verdict == SaintVenantVerdict.GROWTH
    assert result.tail_slope == pytest.approx(0.0, abs=1e-10)


def test_saint_venant_decay_is_inconsistent():
    result = saint_venant_check(T_GRID, np.exp(-T_GRID))
    assert result.verdict == SaintVenantVerdict.INCONSISTENT
    assert result.tail_slope < -0.1


def test_saint_venant_counts_violations():
    # z' = 0 on a constant series, so z <= (z')^m fails wherever z > 0
    result = saint_venant_check(T_GRID, np.ones_like(T_GRID))
    assert result.violations == T_GRID.size


def test_saint_venant_input_checks():
    with pytest.raises(InvalidGridError):
        saint_venant_check([1.0, 1.0, 2.0], [0.0, 0.0, 0.0])
    with pytest.raises(InvalidGridError):
        saint_venant_check([1.0, 2.0], [0.0])
    with pytest.raises(PreconditionError):
        saint_venant_check(T_GRID, T_GRID, m=1.0)
    with pytest.raises(PreconditionError):
        saint_venant_check([1.0, 2.0], [1.0, -1.0])


def test_cutoff_energy_of_zero_field(straight_problem):
    zero = np.zeros(straight_problem.layout.n_velocity)
    assert cutoff_energy(straight_problem.layout, zero, 2.0) == 0.0


def test_default_starts(straight_problem, bump_problem):
    assert [s.label for s in default_starts(straight_problem)] == ["zero", "random"]
    starts = default_starts(bump_problem)
    assert [s.label for s in starts] == ["zero", "random", "carrier"]
    random_start = starts[1].field.velocity_free
    assert bump_problem.h1_norm(random_start) == pytest.approx(0.1, rel=1e-10)


def test_zero_flux_starts_coincide(straight_problem):
    report = multistart_uniqueness(straight_problem)
    assert report.verdict == UniquenessVerdict.COINCIDE
    assert report.labels == ["zero", "random"]
    assert report.failures == []
    assert report.saint_venant == SaintVenantVerdict.TRIVIAL
    assert len(report.distances) == 1
    assert all(c.passed for c in report.checks())


def test_uniqueness_needs_two_starts(straight_problem):
    only = default_starts(straight_problem)[:1]
    with pytest.raises(DegenerateInputError):
        multistart_uniqueness(straight_problem, starts=only)


def test_uniqueness_rejects_bad_grid(straight_problem):
    with pytest.raises(InvalidGridError):
        multistart_uniqueness(straight_problem, t_grid=[1.0, 4.0])


def test_bracket_needs_positive_flux(bump_mesh, bump_params):
    with pytest.raises(PreconditionError):
        bracket_flux_threshold(bump_mesh, bump_params, 0.0, 2)


def test_inconclusive_report_fails_checks():
    report = UniquenessReport(
        flux=1.0,
        labels=["zero", "random"],
        threshold=1e-7,
        verdict=UniquenessVerdict.INCONCLUSIVE,
        failures=["random: no convergence"],
    )
    names = {c.name: c.passed for c in report.checks()}
    assert names == {"all_starts_converged": False, "max_pairwise_distance": True}


def test_bracket_rows():
    bracket = FluxBracket(lower=0.25, upper=0.5, trials=[(1.0, UniquenessVerdict.DISTINCT)])
    assert [r.name for r in bracket.rows()] == ["flux_threshold_lower", "flux_threshold_upper"]
    assert [r.name for r in FluxBracket(lower=1.0).rows()] == ["flux_threshold_lower"]


@pytest.mark.slow
def test_three_starts_coincide_at_quarter_flux(bump_problem):
    report = multistart_uniqueness(bump_problem)
    assert report.labels == ["zero", "random", "carrier"]
    assert report.failures == []
    assert len(report.distances) == 3
    assert report.verdict == UniquenessVerdict.COINCIDE
    assert report.max_distance <= 1e-6
    assert report.station_flux_error <= 1e-8
