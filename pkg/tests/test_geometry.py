"""Body levelset, cell classification and cut-cell geometric data."""

import numpy as np
import pytest
from scipy.integrate import quad

from cutcell import (
    CUT,
    FLUID,
    RELOCATED,
    SOLID,
    ConfigError,
    LevelSetBody,
    UnderResolvedGeometryError,
    body_velocity,
    build_grid,
    classify,
    cut_geometry,
    levelset_eval,
)


def circle(r=0.5, center=(0.0, 0.0), **kw):
    return LevelSetBody(center=center, radius=r, **kw)


# -- levelset and motion law -------------------------------------------------

def test_levelset_values():
    b = circle()
    assert levelset_eval(b, np.array([1.0, 0.0])) == pytest.approx(0.5, abs=1e-15)
    assert levelset_eval(b, np.array([0.5, 0.0])) == 0.0
    assert levelset_eval(b, np.array([0.0, 0.0])) == -0.5


def test_levelset_translation_invariance():
    b = circle(motion="sinusoidal", alpha=0.7)
    for t in (0.0, 0.3, 1.7, np.pi, 5.0):
        c = b.center_at(t)
        assert levelset_eval(b, np.array([c[0] + 0.5, c[1]]), t) == pytest.approx(0.0, abs=1e-14)


def test_body_velocity_law():
    b = circle(motion="sinusoidal", alpha=1.0)
    np.testing.assert_allclose(body_velocity(b, 0.0), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(body_velocity(b, np.pi), [2.0, 0.0], atol=1e-14)
    fixed = circle()
    np.testing.assert_array_equal(body_velocity(fixed, 2.3), [0.0, 0.0])


def test_center_integrates_velocity_exactly():
    # Oracle: numerically integrate the velocity law and compare against the
    # closed-form center offset.
    b = circle(motion="sinusoidal", alpha=0.25)
    for t in (0.5, 2.0, np.pi, 6.0):
        ref, _ = quad(lambda s: b.alpha * 2.0 * np.sin(0.5 * s), 0.0, t)
        offset = b.center_at(t)[0] - b.center[0]
        assert offset == pytest.approx(ref, abs=1e-12)
    assert b.max_center_offset(2.0 * np.pi) == pytest.approx(8.0 * 0.25, abs=1e-14)


def test_body_validation():
    with pytest.raises(ConfigError):
        LevelSetBody(center=(0.0, 0.0), radius=0.0)
    with pytest.raises(ConfigError):
        LevelSetBody(center=(0.0, 0.0), radius=0.5, motion="spiral")


# -- classification ----------------------------------------------------------

def test_classify_four_by_four():
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=4, ny=4)
    mask = classify(g, circle())
    # cell (0,1)x(0,1): corner at the origin is inside, the rest outside
    assert mask.cell[2, 2] == CUT
    assert mask.cell[0, 0] == FLUID
    assert mask.n_solid == 0  # no cell has all four corners inside r=0.5 at h=1


def test_classify_no_body():
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=8, ny=8)
    mask = classify(g, None)
    assert np.all(mask.cell == FLUID)
    assert mask.n_cut == 0
    assert np.all(mask.u_node == FLUID) and np.all(mask.v_node == FLUID)


def test_classify_body_outside_domain():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=8, ny=8)
    mask = classify(g, circle(center=(5.0, 5.0)))
    assert np.all(mask.cell == FLUID)


def test_classify_body_touching_boundary_rejected():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=16, ny=16)
    with pytest.raises(ConfigError):
        classify(g, circle(center=(0.6, 0.0)))


def test_cut_count_matches_brute_force_scan():
    # Independent oracle: sign scan of the levelset at the four corners of
    # every cell.  SOLID = all <= 0, FLUID = all >= 0, CUT otherwise.
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=256, ny=256)
    body = circle()
    X, Y = np.meshgrid(g.x_faces, g.y_faces, indexing="ij")
    phi = np.hypot(X, Y) - body.radius
    c00, c10 = phi[:-1, :-1], phi[1:, :-1]
    c01, c11 = phi[:-1, 1:], phi[1:, 1:]
    solid = (c00 <= 0) & (c10 <= 0) & (c01 <= 0) & (c11 <= 0)
    fluid = (c00 >= 0) & (c10 >= 0) & (c01 >= 0) & (c11 >= 0)
    n_cut_scan = int(np.count_nonzero(~solid & ~fluid))
    assert n_cut_scan == 252  # frozen from the scan above

    mask = classify(g, body)
    assert mask.n_cut == n_cut_scan
    assert mask.n_solid == int(np.count_nonzero(solid))


def test_cut_cells_have_mixed_corner_signs():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=48, ny=48)
    body = circle()
    mask = classify(g, body)
    X, Y = np.meshgrid(g.x_faces, g.y_faces, indexing="ij")
    phi = np.hypot(X, Y) - body.radius
    for i, j in np.argwhere(mask.cell == CUT):
        corners = np.array([phi[i, j], phi[i + 1, j], phi[i, j + 1], phi[i + 1, j + 1]])
        assert corners.min() < 0.0 and corners.max() > 0.0


def test_under_resolved_face_rejected():
    # Body smaller than a cell, centered on a horizontal face line: the face
    # dips through the body with both endpoints in the fluid.
    g = build_grid((-4.0, 4.0, -4.0, 4.0), nx=8, ny=8)
    with pytest.raises(UnderResolvedGeometryError):
        classify(g, circle(r=0.2, center=(0.5, 1.0)))


# -- cut geometry ------------------------------------------------------------

def test_face_cut_against_analytic_intersection():
    # Face from (0.5, 0) to (0.5, 1) against a circle of radius sqrt(0.5):
    # the analytic intersection is y* = sqrt(r^2 - 0.25) = 0.5, the fluid part
    # is the upper half, so xi = 0.5 and the relocated unknown sits at 0.75.
    g = build_grid((-3.5, 4.5, -4.0, 4.0), nx=8, ny=8)
    body = circle(r=np.sqrt(0.5))
    mask = classify(g, body)
    geom = cut_geometry(g, body, mask)
    assert g.x_faces[4] == 0.5 and g.y_faces[4] == 0.0
    assert mask.u_node[4, 4] == RELOCATED
    assert geom.xi_u[4, 4] == pytest.approx(0.5, abs=1e-12)
    assert geom.cut_y_u[4, 4] == pytest.approx(0.5, abs=1e-12)
    assert geom.kappa_u[4, 4] == pytest.approx(0.75, abs=1e-12)


def test_uncut_face_defaults():
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=16, ny=16)
    body = circle()
    geom = cut_geometry(g, body, classify(g, body))
    assert geom.xi_u[0, 0] == 1.0
    assert geom.kappa_u[0, 0] == g.yc[0]
    assert geom.xi_v[0, 0] == 1.0
    assert geom.kappa_v[0, 0] == g.xc[0]
    assert np.isnan(geom.cut_y_u[0, 0])


def test_aperture_consistency_with_cut_points():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=128, ny=128)
    body = circle()
    mask = classify(g, body)
    geom = cut_geometry(g, body, mask)
    cut_u = np.argwhere(mask.u_node == RELOCATED)
    assert cut_u.size > 0
    for i, j in cut_u:
        x = g.x_faces[i]
        lo, hi = g.y_faces[j], g.y_faces[j + 1]
        y_star = geom.cut_y_u[i, j]
        fluid_above = np.hypot(x, hi) - body.radius > 0.0
        frac = (hi - y_star) / g.hy if fluid_above else (y_star - lo) / g.hy
        assert abs(geom.xi_u[i, j] - frac) <= 1e-12
        assert lo - 1e-12 <= y_star <= hi + 1e-12


def test_boundary_segments_close_and_normals():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=128, ny=128)
    body = circle()
    geom = cut_geometry(g, body, classify(g, body))
    assert geom.n_segments > 0

    # closed polyline: segment vectors sum to zero
    gap = np.abs(np.sum(geom.seg_p2 - geom.seg_p1, axis=0))
    assert np.max(gap) <= 1e-10 * geom.perimeter

    # perimeter approximates pi * D
    assert geom.perimeter == pytest.approx(np.pi, rel=0.02)

    # unit normals, orthogonal to their segment, pointing into the fluid
    norms = np.hypot(geom.seg_normal[:, 0], geom.seg_normal[:, 1])
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    tangents = geom.seg_p2 - geom.seg_p1
    dots = np.abs(np.sum(geom.seg_normal * tangents, axis=1))
    assert np.max(dots) <= 1e-10 * np.max(geom.seg_len)
    probe = geom.seg_mid + 1e-3 * geom.seg_normal
    assert np.all(levelset_eval(body, probe) > levelset_eval(body, geom.seg_mid))


def test_perimeter_refinement():
    body = circle()
    errs = []
    for n in (32, 64, 128):
        g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=n, ny=n)
        geom = cut_geometry(g, body, classify(g, body))
        errs.append(abs(geom.perimeter - np.pi) / np.pi)
    # first order or better under refinement
    assert errs[1] <= 0.6 * errs[0]
    assert errs[2] <= 0.6 * errs[1]


def test_aperture_snapping():
    g = build_grid((-2.0, 2.0, -2.0, 2.0), nx=64, ny=64)
    # circle top ends 1e-8 below a cell-top face: the sliver face snaps solid
    b = circle(center=(0.0, -1e-8))
    geom = cut_geometry(g, b, classify(g, b))
    assert geom.xi_u[32, 39] == 0.0
    assert classify(g, b).u_node[32, 39] == SOLID
    # circle top pokes 1e-8 above the face: the nearly whole face snaps fluid
    b = circle(center=(0.0, 1e-8))
    mask = classify(g, b)
    geom = cut_geometry(g, b, mask)
    assert geom.xi_u[32, 40] == 1.0
    assert mask.u_node[32, 40] == FLUID
    assert geom.kappa_u[32, 40] == g.yc[40]


def test_reflection_symmetry_is_exact():
    # power-of-two spacing keeps mirrored ordinates exact negatives
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=64, ny=64)
    body = circle(r=0.4, center=(0.2, 0.0))
    mask = classify(g, body)
    geom = cut_geometry(g, body, mask)

    np.testing.assert_array_equal(mask.cell, mask.cell[:, ::-1])
    np.testing.assert_array_equal(mask.u_node, mask.u_node[:, ::-1])
    np.testing.assert_array_equal(mask.v_node, mask.v_node[:, ::-1])
    np.testing.assert_array_equal(geom.xi_u, geom.xi_u[:, ::-1])
    np.testing.assert_array_equal(geom.xi_v, geom.xi_v[:, ::-1])
    np.testing.assert_array_equal(geom.kappa_u, -geom.kappa_u[:, ::-1])
    # area is an accumulated quantity; summation order differs across the
    # mirror, so exactness stops at one ulp
    np.testing.assert_allclose(geom.fluid_area, geom.fluid_area[:, ::-1],
                               atol=1e-15)


def test_moving_body_geometry_tracks_center():
    g = build_grid((-3.0, 3.0, -1.0, 1.0), nx=150, ny=50)
    body = circle(motion="sinusoidal", alpha=0.25)
    t = 1.2
    mask = classify(g, body, t)
    geom = cut_geometry(g, body, mask, t)
    c = body.center_at(t)
    # every boundary segment midpoint sits within a cell of the shifted circle
    d = np.abs(np.hypot(geom.seg_mid[:, 0] - c[0], geom.seg_mid[:, 1] - c[1])
               - body.radius)
    assert np.max(d) <= g.hy
    # and the fluid area complement approximates the disk area
    solid_area = g.cell_areas().sum() - geom.fluid_area.sum()
    assert solid_area == pytest.approx(np.pi * body.radius**2, rel=0.02)
