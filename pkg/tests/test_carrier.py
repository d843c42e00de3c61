import numpy as np
import pytest
from pydantic import ValidationError

from carrier.field import CarrierField, CarrierParams, CutoffParams, carrier_eval, default_cutoffs, stream_G
from carrier.verification import CarrierSampling, hardy_ratio, hardy_scaling, layer_test_field, verify_carrier
from channel import eval_walls
from errors import DegenerateInputError, DomainError, PreconditionError


@pytest.fixture
def straight_params(straight_geometry) -> CarrierParams:
    return CarrierParams(flux=1.0, cutoffs=CutoffParams(epsilon=0.1, dist=1.0), geometry=straight_geometry)


def test_layer_must_fit(straight_geometry):
    with pytest.raises(ValidationError, match="m/2"):
        CarrierParams(flux=1.0, cutoffs=CutoffParams(epsilon=0.6, dist=1.0), geometry=straight_geometry)


def test_dist_must_exceed_bump(bump_geometry):
    with pytest.raises(ValidationError, match="must be > L"):
        CarrierParams(flux=1.0, cutoffs=CutoffParams(epsilon=0.1, dist=1.5), geometry=bump_geometry)


def test_default_cutoffs(straight_geometry, bump_geometry):
    auto = default_cutoffs(straight_geometry, 0.25)
    assert auto.epsilon == pytest.approx(0.45)
    assert auto.dist == 1.0
    fine = default_cutoffs(bump_geometry, 0.01)
    assert fine.epsilon == pytest.approx(0.08)
    assert fine.dist == 3.0
    explicit = default_cutoffs(bump_geometry, 0.25, epsilon=0.2, dist=4.0, smooth_pi=True)
    assert (explicit.epsilon, explicit.dist, explicit.smooth_pi) == (0.2, 4.0, True)


@pytest.mark.parametrize("params_name", ["straight_params", "bump_params"])
def test_verify_carrier_passes(params_name, request):
    params = request.getfixturevalue(params_name)
    report = verify_carrier(params)
    failed = [c.name for c in report.checks(params) if not c.passed]
    assert failed == []
    assert report.warnings == []
    assert report.energy_gradient > 0.0


def test_under_resolved_layer_warns(straight_params):
    report = verify_carrier(straight_params, CarrierSampling(depth=8, axial=21, stations=3, wall_points=20))
    assert report.layer_samples == 4
    assert len(report.warnings) == 1


@pytest.mark.parametrize("x1", [-3.0, -0.7, 0.0, 0.4, 2.5])
def test_section_flux_matches(bump_params, x1):
    assert CarrierField(bump_params).section_flux(x1) == pytest.approx(bump_params.flux, abs=1e-10)


def test_far_field_is_exact(bump_params):
    field = CarrierField(bump_params)
    x2 = np.linspace(-1.0, 1.0, 9)
    for x1 in (field.support, -field.support - 0.3):
        value = field.evaluate(np.stack([np.full(x2.shape, x1), x2], axis=-1))
        np.testing.assert_array_equal(value.g, np.tile(field.far_field, (x2.size, 1)))
        assert np.all(value.grad == 0.0)


def test_zero_flux_carrier_vanishes(bump_params):
    field = CarrierField(bump_params.with_flux(0.0))
    value = field.evaluate(np.array([[0.0, 1.0], [2.5, 0.2], [-1.0, -0.9]]))
    assert np.all(value.g == 0.0)


def test_points_outside_channel_rejected(bump_params):
    with pytest.raises(DomainError, match="outside"):
        CarrierField(bump_params).evaluate(np.array([[0.0, 5.0]]))


def test_hardy_ratio_guards(bump_params):
    def vanishing(points):
        return np.zeros(points.shape[0]), np.zeros(points.shape[0])

    def wall_value(points):
        return np.ones(points.shape[0]), np.zeros(points.shape[0])

    with pytest.raises(DegenerateInputError):
        hardy_ratio(bump_params, vanishing)
    with pytest.raises(PreconditionError):
        hardy_ratio(bump_params, wall_value)
    with pytest.raises(DegenerateInputError):
        hardy_ratio(bump_params.with_flux(0.0), layer_test_field(bump_params))


def test_hardy_ratio_is_scale_free(bump_params):
    scaling = hardy_scaling(bump_params)
    assert [eps for eps, _ in scaling] == pytest.approx([0.3, 0.15, 0.075])
    ratios = [ratio for _, ratio in scaling]
    assert min(ratios) > 0.0
    assert max(ratios) / min(ratios) <= 2.0


def test_inner_carrier_is_rotated_stream_gradient(bump_params):
    points = np.array([[-1.2, 0.5], [0.3, 0.8], [1.0, -0.4], [0.0, 1.15]])
    jet = stream_G(points, bump_params)
    value = carrier_eval(points, bump_params)
    np.testing.assert_allclose(value.g[:, 0], jet.grad[:, 1], rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(value.g[:, 1], -jet.grad[:, 0], rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(value.divergence, 0.0, atol=1e-10)


def test_stream_wall_values(bump_params):
    x1 = np.array([-2.5, -0.6, 0.0, 0.9, 3.0])
    walls = eval_walls(bump_params.geometry, x1)
    upper = stream_G(np.stack([x1, walls.f2], axis=-1), bump_params)
    lower = stream_G(np.stack([x1, walls.f1], axis=-1), bump_params)
    np.testing.assert_allclose(upper.G, bump_params.flux, rtol=1e-14)
    np.testing.assert_array_equal(lower.G, 0.0)
