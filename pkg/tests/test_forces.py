"""Surface force integral, drag/lift coefficients, short-time drag law."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from cutcell import (
    BodyForce,
    ConfigError,
    LevelSetBody,
    body_force,
    build_grid,
    classify,
    coefficients,
    cut_geometry,
    predicted_drag,
)


def circle_case(n=128, bounds=(-2.0, 2.0, -2.0, 2.0), r=0.5):
    g = build_grid(bounds, nx=n, ny=n)
    body = LevelSetBody(center=(0.0, 0.0), radius=r)
    mask = classify(g, body)
    geom = cut_geometry(g, body, mask)
    return g, body, geom


def flow(g, p, u=None, v=None, t=0.0):
    nx, ny = g.nx, g.ny
    return SimpleNamespace(
        p=p,
        u=np.zeros((nx + 1, ny)) if u is None else u,
        v=np.zeros((nx, ny + 1)) if v is None else v,
        t=t,
    )


# -- body_force -----------------------------------------------------------------

def test_uniform_pressure_no_shear_gives_zero_force():
    g, body, geom = circle_case()
    c = 3.7
    state = flow(g, np.full((g.nx, g.ny), c))
    f = body_force(g, state, geom, re=1000.0, body=body)
    assert np.max(np.abs(f.total)) <= 1e-10 * c * geom.perimeter
    np.testing.assert_array_equal(f.viscous, np.zeros(2))


def test_linear_pressure_recovers_buoyancy_integral():
    # exact integral of -x n over a circle of radius 1/2 is (-pi/4, 0)
    g, body, geom = circle_case(n=256)
    state = flow(g, np.broadcast_to(g.xc[:, None], (g.nx, g.ny)).copy())
    f = body_force(g, state, geom, re=1000.0, body=body)
    exact = -math.pi * 0.5**2
    assert abs(f.pressure[0] - exact) <= 0.02 * abs(exact)
    assert abs(f.pressure[1]) <= 1e-10
    np.testing.assert_array_equal(f.viscous, np.zeros(2))


def test_y_symmetric_state_has_zero_lift():
    g, body, geom = circle_case()
    xf, yc = g.x_faces, g.yc
    xc, yf = g.xc, g.y_faces
    u = np.exp(-(xf[:, None] ** 2 + yc[None, :] ** 2))
    v = yf[None, :] * np.exp(-(xc[:, None] ** 2))
    p = np.cos(xc[:, None]) * np.cosh(yc[None, :])
    f = body_force(g, flow(g, p, u, v), geom, re=500.0, body=body)
    assert abs(f.total[1]) <= 1e-10


def test_force_invariant_under_pressure_constant():
    g, body, geom = circle_case()
    rng = np.random.default_rng(21)
    p = rng.standard_normal((g.nx, g.ny))
    u = rng.standard_normal((g.nx + 1, g.ny))
    v = rng.standard_normal((g.nx, g.ny + 1))
    f0 = body_force(g, flow(g, p, u, v), geom, re=100.0, body=body)
    f1 = body_force(g, flow(g, p + 11.0, u, v), geom, re=100.0, body=body)
    assert np.max(np.abs(f1.total - f0.total)) <= 1e-10 * 11.0 * geom.perimeter
    np.testing.assert_array_equal(f1.viscous, f0.viscous)


def test_no_body_means_no_force():
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=32, ny=32)
    mask = classify(g, None)
    geom = cut_geometry(g, None, mask)
    f = body_force(g, flow(g, np.ones((32, 32))), geom, re=100.0)
    np.testing.assert_array_equal(f.total, np.zeros(2))


# -- coefficients -----------------------------------------------------------------

def test_coefficient_definitions():
    f = BodyForce(pressure=np.array([0.5, 0.0]), viscous=np.zeros(2))
    c = coefficients(f, t=0.05)
    assert c.cd == 1.0
    assert c.t == pytest.approx(0.1, abs=1e-15)
    f = BodyForce(pressure=np.zeros(2), viscous=np.array([0.0, 0.25]))
    assert coefficients(f, t=1.0).cl == 0.5


def test_coefficient_split_sums_to_total():
    f = BodyForce(pressure=np.array([0.371, -0.02]),
                  viscous=np.array([0.113, 0.007]))
    c = coefficients(f, t=0.3)
    assert abs(c.cd - (c.cd_pressure + c.cd_viscous)) <= 1e-12


def test_coefficients_scale_with_reference_values():
    f = BodyForce(pressure=np.array([0.5, 0.0]), viscous=np.zeros(2))
    c = coefficients(f, t=0.05, u_inf=2.0, diameter=0.5)
    assert c.t == pytest.approx(2.0 * 2.0 * 0.05 / 0.5, abs=1e-15)
    with pytest.raises(ConfigError):
        coefficients(f, t=0.1, u_inf=0.0)
    with pytest.raises(ConfigError):
        coefficients(f, t=0.1, diameter=-1.0)


# -- predicted drag -----------------------------------------------------------------

def test_predicted_drag_reference_values():
    assert abs(predicted_drag(1000.0, 0.1) - 1.0060264) <= 1e-6
    assert abs(predicted_drag(3000.0, 0.2) - 0.4104560) <= 1e-6
    # frozen full-precision values pin the implementation exactly
    assert predicted_drag(1000.0, 0.1) == pytest.approx(
        1.0060263620898509, abs=1e-14)
    assert predicted_drag(3000.0, 0.2) == pytest.approx(
        0.410455700591079, abs=1e-14)


def test_predicted_drag_large_time_limit():
    # singular term dies off; what is left is the constant offset term
    assert abs(predicted_drag(1000.0, 1e20) - 0.0033751) <= 1e-7


def test_predicted_drag_monotone_decreasing():
    ts = np.logspace(-3.0, 1.0, 25)
    for re in (500.0, 1000.0, 3000.0):
        vals = np.array([predicted_drag(re, t) for t in ts])
        assert np.all(np.diff(vals) < 0.0)
    res = np.array([500.0, 800.0, 1000.0, 2000.0, 3000.0])
    for t in (0.05, 0.2, 1.0):
        vals = np.array([predicted_drag(re, t) for re in res])
        assert np.all(np.diff(vals) < 0.0)


def test_predicted_drag_short_time_asymptote():
    for re in (500.0, 1000.0, 3000.0):
        t = 1e-12
        lim = 4.0 * math.sqrt(2.0 * math.pi / re)
        assert abs(predicted_drag(re, t) * math.sqrt(t) - lim) <= 1e-6 * lim


def test_predicted_drag_validation():
    with pytest.raises(ConfigError):
        predicted_drag(0.0, 0.1)
    with pytest.raises(ConfigError):
        predicted_drag(1000.0, -0.1)
