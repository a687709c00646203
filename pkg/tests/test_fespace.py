import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpsi.errors import ArgumentError
from fpsi.fespace import (
    build_space,
    dirichlet_bcs,
    edge_shape_values,
    evaluate,
    interpolate,
    shape_grads,
    shape_values,
)
from fpsi.mesh import Marker, Region, refine_uniform


def test_dimensions_on_smallest_mesh(tiny_mesh):
    # one square: 4 vertices, 5 edges
    assert build_space(tiny_mesh, "STOKES", "P2", 2).dimension == 18
    assert build_space(tiny_mesh, "POROUS", "P2", 1).dimension == 9
    assert build_space(tiny_mesh, "POROUS", "P1", 2).dimension == 8
    assert build_space(tiny_mesh, "STOKES", "P1").dimension == 4
    assert build_space(tiny_mesh, "INTERFACE", "P1").dimension == 2


def test_counts_follow_euler_formula(coarse_mesh):
    for region in (Region.STOKES, Region.POROUS):
        cells = coarse_mesh.region_cells(region)
        nv = len(np.unique(coarse_mesh.triangles[cells]))
        ne = len(np.unique(coarse_mesh.tri_edges[cells]))
        assert nv - ne + len(cells) == 1  # simply connected subdomain
        assert build_space(coarse_mesh, region, "P1").n_nodes == nv
        assert build_space(coarse_mesh, region, "P2").n_nodes == nv + ne


def test_interface_space_is_scalar(tiny_mesh):
    with pytest.raises(ArgumentError):
        build_space(tiny_mesh, "INTERFACE", "P1", components=2)


@pytest.mark.parametrize("kwargs", [dict(family="P3"), dict(components=3), dict(subdomain="ROCK")])
def test_bad_arguments(tiny_mesh, kwargs):
    args = dict(subdomain="STOKES", family="P1", components=1) | kwargs
    with pytest.raises(ArgumentError):
        build_space(tiny_mesh, **args)


def test_dof_growth_under_refinement(coarse_mesh):
    m2 = refine_uniform(coarse_mesh)
    for fam in ("P1", "P2"):
        a = build_space(coarse_mesh, "POROUS", fam, 2).dimension
        b = build_space(m2, "POROUS", fam, 2).dimension
        assert 3.0 < b / a < 4.5


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3))
def test_partition_of_unity(raw):
    bary = np.array(raw) / sum(raw)
    for fam in ("P1", "P2"):
        assert shape_values(fam, bary).sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(shape_grads(fam, bary).sum(axis=0), 0.0, atol=1e-13)
    s = bary[0]
    assert edge_shape_values("P2", s).sum() == pytest.approx(1.0, abs=1e-14)


def test_shape_gradients_match_finite_differences(rng):
    # gradients in (xi, eta) with lambda = (1 - xi - eta, xi, eta)
    h = 1e-6
    for _ in range(10):
        xi, eta = rng.uniform(0.05, 0.45, 2)
        for fam in ("P1", "P2"):
            def phi(a, b):
                return shape_values(fam, np.array([1 - a - b, a, b]))
            fd = np.stack([(phi(xi + h, eta) - phi(xi - h, eta)) / (2 * h),
                           (phi(xi, eta + h) - phi(xi, eta - h)) / (2 * h)], axis=1)
            np.testing.assert_allclose(shape_grads(fam, np.array([1 - xi - eta, xi, eta])), fd, atol=1e-8)


def test_nodal_basis_is_kronecker():
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [.5, .5, 0], [0, .5, .5], [.5, 0, .5]])
    np.testing.assert_allclose(shape_values("P2", nodes), np.eye(6), atol=1e-15)
    np.testing.assert_allclose(edge_shape_values("P2", np.array([0.0, 1.0, 0.5])), np.eye(3), atol=1e-15)


def _porous_points(rng, n=50):
    return np.column_stack([rng.uniform(0, 1, n), rng.uniform(1, 2, n)])


def test_constant_interpolation(coarse_mesh, rng):
    V = build_space(coarse_mesh, "POROUS", "P2", 2)
    c = interpolate(V, (3.0, -1.5))
    vals = evaluate(V, c, _porous_points(rng))
    np.testing.assert_allclose(vals, np.tile([3.0, -1.5], (50, 1)), atol=1e-13)


def test_linear_reproduced_by_p1(coarse_mesh, rng):
    V = build_space(coarse_mesh, "POROUS", "P1")
    f = lambda x, y, t: 2 * x - 3 * y + 0.5
    pts = _porous_points(rng)
    np.testing.assert_allclose(evaluate(V, interpolate(V, f), pts), f(pts[:, 0], pts[:, 1], 0), atol=1e-13)


def test_quadratic_reproduced_by_p2(coarse_mesh, rng):
    V = build_space(coarse_mesh, "STOKES", "P2", 2)
    f = lambda x, y, t: (x**2 - x * y + 2 * y**2 + t, 1 - 3 * x * x + y)
    pts = np.column_stack([rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)])
    got = evaluate(V, interpolate(V, f, t=0.3), pts)
    want = np.column_stack(f(pts[:, 0], pts[:, 1], 0.3))
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_evaluate_outside_subdomain(coarse_mesh):
    V = build_space(coarse_mesh, "STOKES", "P1")
    with pytest.raises(ArgumentError):
        evaluate(V, np.zeros(V.dimension), np.array([[0.5, 1.5]]))


def test_vertex_values(small_mesh):
    V = build_space(small_mesh, "POROUS", "P2", 2)
    c = interpolate(V, lambda x, y, t: (x, y))
    vv = V.vertex_values(c, fill=np.nan)
    inside = V.vertex_node >= 0
    np.testing.assert_allclose(vv[inside], small_mesh.vertices[inside], atol=1e-14)
    assert np.all(np.isnan(vv[~inside]))


# -- essential conditions ----------------------------------------------------------
WALLS = ("WALL_LEFT", "WALL_RIGHT", "WALL_BOTTOM")


def test_zero_dirichlet_on_stokes_walls(small_mesh):
    V = build_space(small_mesh, "STOKES", "P2", 2)
    bc = dirichlet_bcs(V, WALLS, 0.0)
    xy = V.dof_coords[bc.dofs]
    on_wall = np.isclose(xy[:, 0], 0) | np.isclose(xy[:, 0], 1) | np.isclose(xy[:, 1], 0)
    assert on_wall.all()
    # 3 sides of 3 edges each: 3*3*2 + 1 nodes per side, corners shared
    assert len(bc) == 2 * (3 * 7 - 2)
    np.testing.assert_array_equal(bc.values(0.7), 0.0)


def test_dirichlet_values_follow_data(small_mesh):
    V = build_space(small_mesh, "POROUS", "P2", 2)
    g = lambda x, y, t: (np.sin(x) * t, y + t)
    bc = dirichlet_bcs(V, ["WALL_TOP"], g)
    xy = V.dof_coords[bc.dofs]
    comp = bc.dofs // V.n_nodes
    want = np.where(comp == 0, np.sin(xy[:, 0]) * 0.5, xy[:, 1] + 0.5)
    np.testing.assert_allclose(bc.values(0.5), want, atol=1e-15)


def test_component_selection(small_mesh):
    V = build_space(small_mesh, "POROUS", "P1", 2)
    bc = dirichlet_bcs(V, ["WALL_LEFT"], 0.0, components=[0])
    assert np.all(bc.dofs < V.n_nodes)
    with pytest.raises(ArgumentError):
        dirichlet_bcs(V, ["WALL_LEFT"], 0.0, components=[2])


def test_empty_marker_set(small_mesh):
    V = build_space(small_mesh, "STOKES", "P1")
    assert len(dirichlet_bcs(V, [], 1.0)) == 0
    assert len(dirichlet_bcs(V, [], 1.0).values(0.0)) == 0


def test_missing_marker(small_mesh):
    V = build_space(small_mesh, "STOKES", "P1")
    with pytest.raises(ArgumentError):
        dirichlet_bcs(V, ["INLET"], 0.0)


def test_markers_of_other_subdomain_select_nothing(small_mesh):
    # the porous top wall has no nodes in the Stokes space
    V = build_space(small_mesh, "STOKES", "P1")
    assert len(dirichlet_bcs(V, [Marker.WALL_TOP], 0.0)) == 0
