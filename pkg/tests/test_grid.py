"""Staggered-grid construction and node placement."""

import numpy as np
import pytest

from cutcell import ConfigError, StaggeredGrid, build_grid, field_positions


def test_uniform_partition():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=4, ny=4)
    np.testing.assert_array_equal(g.x_faces, [-1.0, -0.5, 0.0, 0.5, 1.0])
    np.testing.assert_array_equal(g.y_faces, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert g.nx == 4 and g.ny == 4
    assert g.hy == 0.5
    assert g.bounds == (-1.0, 1.0, -1.0, 1.0)


def test_spacing_request_sets_counts():
    g = build_grid((-3.0, 3.0, -1.0, 1.0), h=5e-3)
    assert g.nx == 1200
    assert g.ny == 400


def test_spacing_must_divide_extents():
    with pytest.raises(ConfigError):
        build_grid((-3.0, 3.0, -1.0, 1.0), h=7e-3)


def test_tanh_stretch_matches_direct_map_evaluation():
    # Oracle: evaluate the center-clustering map itself at 65 equispaced
    # parameters.  The map sends s in [0,1] to
    #   c + (L/2) * atanh((2s-1) tanh(gamma)) / gamma
    # which is strictly increasing and hits the interval ends exactly.
    lo, hi, n, gamma = -10.0, 10.0, 64, 2.0
    s = np.linspace(0.0, 1.0, n + 1)
    expected = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.arctanh(
        (2.0 * s - 1.0) * np.tanh(gamma)) / gamma
    expected[0], expected[-1] = lo, hi
    assert np.all(np.diff(expected) > 0.0)

    g = build_grid((lo, hi, -10.0, 10.0), nx=n, ny=8, stretch="tanh",
                   stretch_gamma=gamma)
    np.testing.assert_allclose(g.x_faces, expected, rtol=0.0, atol=1e-13)
    # cells cluster near the center
    assert g.hx_min == pytest.approx(g.hx[n // 2], rel=1e-12)
    assert g.hx[0] > 2.0 * g.hx_min


def test_tanh_gamma_zero_degenerates_to_uniform():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=8, ny=8, stretch="tanh",
                   stretch_gamma=0.0)
    np.testing.assert_allclose(g.x_faces, np.linspace(0.0, 1.0, 9), atol=1e-15)


def test_explicit_face_list():
    xf = np.array([0.0, 0.1, 0.3, 0.6, 1.0])
    g = build_grid((0.0, 1.0, 0.0, 1.0), ny=4, x_faces=xf)
    np.testing.assert_array_equal(g.x_faces, xf)
    with pytest.raises(ConfigError):
        build_grid((0.0, 2.0, 0.0, 1.0), ny=4, x_faces=xf)


def test_p_positions_are_cell_centers():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=4)
    pos = field_positions(g, "p")
    assert pos.shape == (16, 2)
    # x-major ordering: first point is the lower-left center
    np.testing.assert_allclose(pos[0], [0.125, 0.125])
    np.testing.assert_allclose(pos[-1], [0.875, 0.875])
    # arithmetic means of the bounding faces
    xc = 0.5 * (g.x_faces[:-1] + g.x_faces[1:])
    yc = 0.5 * (g.y_faces[:-1] + g.y_faces[1:])
    np.testing.assert_array_equal(np.unique(pos[:, 0]), xc)
    np.testing.assert_array_equal(np.unique(pos[:, 1]), yc)


def test_u_positions_are_vertical_face_midpoints():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=4)
    pos = field_positions(g, "u")
    assert pos.shape == (5 * 4, 2)
    xs = np.unique(pos[:, 0])
    ys = np.unique(pos[:, 1])
    np.testing.assert_array_equal(xs, g.x_faces)
    np.testing.assert_allclose(ys, [0.125, 0.375, 0.625, 0.875])


def test_v_positions_on_symmetric_grid():
    g = build_grid((-1.0, 1.0, -1.0, 1.0), nx=4, ny=4)
    pos = field_positions(g, "v")
    interior = pos[(pos[:, 1] > -1.0) & (pos[:, 1] < 1.0)]
    np.testing.assert_array_equal(np.unique(interior[:, 1]), [-0.5, 0.0, 0.5])
    np.testing.assert_array_equal(np.unique(interior[:, 0]), g.xc)


def test_unknown_field_kind():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=4)
    with pytest.raises(ConfigError):
        field_positions(g, "w")


@pytest.mark.parametrize("kwargs", [
    dict(nx=16, ny=16),
    dict(nx=32, ny=8, stretch="tanh", stretch_gamma=3.0),
])
def test_cell_areas_sum_to_domain_area(kwargs):
    g = build_grid((-2.0, 5.0, -1.5, 1.5), **kwargs)
    area = g.cell_areas().sum()
    assert area == pytest.approx(7.0 * 3.0, rel=1e-12)


def test_minimum_resolution_enforced():
    with pytest.raises(ConfigError):
        build_grid((0.0, 1.0, 0.0, 1.0), nx=3, ny=4)
    with pytest.raises(ConfigError):
        build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=3)


def test_nonmonotone_faces_rejected():
    with pytest.raises(ConfigError):
        StaggeredGrid(np.array([0.0, 0.5, 0.4, 0.8, 1.0]),
                      np.linspace(0.0, 1.0, 5))


def test_nonuniform_y_rejected():
    with pytest.raises(ConfigError):
        StaggeredGrid(np.linspace(0.0, 1.0, 5),
                      np.array([0.0, 0.2, 0.5, 0.8, 1.0]))


def test_unknown_stretch_rejected():
    with pytest.raises(ConfigError):
        build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=4, stretch="geometric")


def test_empty_bounds_rejected():
    with pytest.raises(ConfigError):
        build_grid((1.0, 1.0, 0.0, 1.0), nx=4, ny=4)


def test_grid_is_immutable():
    g = build_grid((0.0, 1.0, 0.0, 1.0), nx=4, ny=4)
    with pytest.raises(Exception):
        g.x_faces = np.zeros(5)
