import math

import numpy as np
import pytest

import exciton


def test_flat_1d_matches_closed_form():
    dev = exciton.DeviceConfig(2.0, 10.0, constant_generation=1.0)
    pl, field = exciton.solve_1d(dev, cells=1024)
    assert pl == pytest.approx(exciton.closed_form_pl(2.0, 10.0), rel=1e-6)
    assert field.shape == (1025,)
    assert field[0] == 0.0


def test_rough_2d_field_is_periodic_and_positive():
    dev = exciton.DeviceConfig(1.5, 2.0)
    model = exciton.InterfaceModel(0.8, 4.0, [1.0, 0.5, 0.25])
    pl, field = exciton.solve_2d(dev, model, [0.9, -0.6, 0.8], ny=24, nz=24)
    assert pl > 0.0
    assert field.shape == (25, 25)
    assert field.min() >= -1e-10
    np.testing.assert_allclose(field[:, 0], field[:, -1])


def test_asymptotic_tracks_collocation_for_small_roughness():
    dev = exciton.DeviceConfig(2.0, 1.0)
    model = exciton.InterfaceModel(0.02, 4.0, [1.0, 1.0])
    asym = exciton.expected_pl_asymptotic(dev, model, ny=32, nz=32)
    coll = exciton.expected_pl_collocation(dev, model, points=3, ny=32, nz=32)
    assert asym == pytest.approx(coll, rel=1e-4)


def test_sigma_recovered_from_1d_curve():
    d = [10.0 * i for i in range(1, 11)]
    pl = exciton.model_1d_curve(5.0, d, cells=256)
    trace = exciton.estimate_sigma_1d(d, pl, 12.0, sigma_exact=5.0, cells=256)
    assert trace.reason == "converged"
    assert trace.final_sigma == pytest.approx(5.0, rel=1e-3)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        exciton.DeviceConfig(-1.0, 10.0)
    model = exciton.InterfaceModel(2.0, 4.0, [1.0])
    with pytest.raises(exciton.DomainError):
        exciton.solve_2d(exciton.DeviceConfig(1.0, 1.0), model, [1.0], ny=8, nz=8)
    assert math.isfinite(model.covariance(1.0, 1.0))
    assert len(exciton.config_hash("[run]\nkind = expect\n")) == 64
