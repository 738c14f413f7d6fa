import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inclusionlab.exceptions import InvalidCoefficientError, InvalidDomainError, InvalidWeightError
from inclusionlab.mesh import (
    Grid,
    assemble_load,
    assemble_stiffness,
    assemble_weighted_mass,
    boundary_data,
    boundary_functional,
    build_rectangle_mesh,
    element_gradients,
    interpolate,
    patch_gradient_functional,
)


def test_smallest_mesh():
    g = build_rectangle_mesh(nx=1, ny=1)
    assert g.n_nodes == 4
    assert g.n_elements == 2
    assert g.element_areas.sum() == pytest.approx(1.0, abs=1e-15)


def test_unit_square_64_area_identity(unit64):
    assert unit64.n_nodes == 65**2
    assert unit64.n_elements == 2 * 64 * 64
    assert abs(unit64.element_areas.sum() - 1.0) <= 1e-12


def test_rectangle_element_areas():
    g = build_rectangle_mesh((0.0, 2.0, 0.0, 1.0), 4, 2)
    # cell is 0.5 x 0.5, halved
    np.testing.assert_allclose(g.element_areas, 1.0 / 8.0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("domain", [(0, 0, 0, 1), (0, 1, 1, 1), (1, 0, 0, 1)])
def test_degenerate_domain(domain):
    with pytest.raises(InvalidDomainError):
        build_rectangle_mesh(domain, 4, 4)


def test_positive_orientation_and_boundary_loop():
    g = build_rectangle_mesh((-1.0, 2.0, 0.5, 1.5), 6, 3)
    assert np.all(g.signed_areas > 0)
    e = g.boundary_edges
    # a single closed loop
    np.testing.assert_array_equal(e[:, 1], np.roll(e[:, 0], -1))
    assert len(set(e[:, 0].tolist())) == len(e) == 2 * (6 + 3)
    assert g.edge_lengths.sum() == pytest.approx(g.perimeter, rel=1e-14)
    # outward normals: midpoint + small step along normal leaves the domain
    mid = g.nodes[e].mean(axis=1) + 1e-6 * g.edge_normals
    x0, x1, y0, y1 = g.domain
    outside = (mid[:, 0] < x0) | (mid[:, 0] > x1) | (mid[:, 1] < y0) | (mid[:, 1] > y1)
    assert outside.all()


def test_stiffness_row_sums_vanish(unit16, rng):
    coeff = rng.uniform(0.1, 3.0, unit16.n_elements)
    K = assemble_stiffness(unit16, coeff)
    rows = np.asarray(K.sum(axis=1)).ravel()
    l1 = np.asarray(abs(K).sum(axis=1)).ravel()
    assert np.all(np.abs(rows) <= 1e-12 * l1)
    assert abs(K - K.T).max() == 0.0


def test_stiffness_quadratic_form_of_x(unit16):
    u = unit16.nodes[:, 0]
    assert u @ (unit16.stiffness @ u) == pytest.approx(1.0, abs=1e-12)


def test_stiffness_linear_in_coefficient(unit16):
    diff = assemble_stiffness(unit16, 2.0) - 2.0 * assemble_stiffness(unit16, 1.0)
    assert abs(diff).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3),
    seed=st.integers(0, 2**31 - 1),
)
def test_patch_test_piecewise_constant_coefficient(unit16, a, b, c, seed):
    coeff = np.random.default_rng(seed).uniform(0.2, 5.0, unit16.n_elements)
    u = a + b * unit16.nodes[:, 0] + c * unit16.nodes[:, 1]
    K = assemble_stiffness(unit16, coeff)
    exact = (b * b + c * c) * np.dot(coeff, unit16.element_areas)
    assert u @ (K @ u) == pytest.approx(exact, rel=1e-11, abs=1e-11)


def test_nonpositive_coefficient_rejected(unit16):
    with pytest.raises(InvalidCoefficientError):
        assemble_stiffness(unit16, 0.0)
    coeff = np.ones(unit16.n_elements)
    coeff[3] = -1.0
    with pytest.raises(InvalidCoefficientError):
        assemble_stiffness(unit16, coeff)


def test_mass_partition_of_unity():
    g = build_rectangle_mesh((0.0, 2.0, -1.0, 0.5), 7, 5)
    assert assemble_weighted_mass(g).sum() == pytest.approx(3.0, abs=1e-12)
    assert assemble_weighted_mass(g, np.ones(g.n_nodes)).sum() == pytest.approx(3.0, abs=1e-12)
    assert assemble_weighted_mass(g, lumped=True).sum() == pytest.approx(3.0, abs=1e-12)


def test_zero_weight_gives_zero_matrix(unit16):
    assert abs(assemble_weighted_mass(unit16, np.zeros(unit16.n_nodes))).max() == 0.0
    assert abs(assemble_weighted_mass(unit16, element_weight=0.0)).max() == 0.0


def test_negative_weight_rejected(unit16):
    w = np.ones(unit16.n_nodes)
    w[0] = -1e-3
    with pytest.raises(InvalidWeightError):
        assemble_weighted_mass(unit16, w)
    with pytest.raises(InvalidWeightError):
        assemble_weighted_mass(unit16, element_weight=-1.0)


def test_affine_weight_mass_is_exact(unit16, rng):
    # int (1 + x) * x * y over the unit square = 1/4 + 1/6 = 5/12
    x, y = unit16.nodes[:, 0], unit16.nodes[:, 1]
    M = assemble_weighted_mass(unit16, 1.0 + x)
    assert x @ (M @ y) == pytest.approx(5.0 / 12.0, abs=1e-12)
    # int (2 + 3y) * x^0 * y = 1 + 1 = 2 ; int (2 + 3y) dx = 2 + 3/2
    one = np.ones(unit16.n_nodes)
    M = assemble_weighted_mass(unit16, 2.0 + 3.0 * y)
    assert one @ (M @ y) == pytest.approx(2.0, abs=1e-12)
    assert M.sum() == pytest.approx(3.5, abs=1e-12)


def test_half_domain_weight_converges_linearly():
    errors, hs = [], []
    for n in (8, 16, 32, 64):
        g = build_rectangle_mesh(nx=n, ny=n)
        chi = (g.nodes[:, 0] < 0.5).astype(float)
        errors.append(abs(assemble_weighted_mass(g, chi).sum() - 0.5))
        hs.append(g.h)
    rates = np.diff(np.log(errors)) / np.diff(np.log(hs))
    assert np.all(errors <= np.array(hs))
    assert np.all(rates > 0.9)


def test_mass_symmetric_psd(unit16, rng):
    M = assemble_weighted_mass(unit16, rng.uniform(0, 2, unit16.n_nodes)).toarray()
    assert np.array_equal(M, M.T)
    assert np.linalg.eigvalsh(M).min() > -1e-14
    w = np.zeros(unit16.n_nodes)
    w[unit16.nodes[:, 0] < 0.3] = 1.0
    Mp = assemble_weighted_mass(unit16, element_weight=1.0).toarray()
    assert np.linalg.eigvalsh(Mp).min() > 0


def test_load_vectors(unit16):
    assert assemble_load(unit16, 1.0).sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(assemble_load(unit16, 0.0) == 0.0)
    assert assemble_load(unit16, unit16.nodes[:, 0]).sum() == pytest.approx(0.5, abs=1e-12)


def test_boundary_functional_basics(unit16):
    g = unit16
    assert boundary_functional(g, 1.0, 1.0) == pytest.approx(4.0, abs=1e-12)
    assert boundary_functional(g, 3.0, 0.0) == 0.0
    assert boundary_functional(g, g.nodes[:, 0], 1.0) == pytest.approx(2.0, abs=1e-10)
    s = boundary_functional(g, 1.0, g.nodes[:, 1] ** 2)
    assert boundary_functional(g, 2.5, g.nodes[:, 1] ** 2) == pytest.approx(2.5 * s, rel=1e-14)


def test_boundary_functional_perimeter_rectangle():
    g = build_rectangle_mesh((0.0, 3.0, 0.0, 0.5), 9, 4)
    assert boundary_functional(g, 1.0, 1.0) == pytest.approx(7.0, abs=1e-12)


def test_boundary_data_handles_corner_jumps(unit16):
    # int n_1 dS = 0 and int x n_1 dS = |Omega| (divergence theorem)
    n1 = boundary_data(unit16, lambda x, y, a, b: a)
    assert boundary_functional(unit16, 1.0, n1) == pytest.approx(0.0, abs=1e-14)
    assert boundary_functional(unit16, unit16.nodes[:, 0], n1) == pytest.approx(1.0, abs=1e-12)


def test_interpolation_and_gradients(unit16, rng):
    u = 1.0 + 2.0 * unit16.nodes[:, 0] - 0.5 * unit16.nodes[:, 1]
    pts = rng.uniform(0, 1, (50, 2))
    np.testing.assert_allclose(interpolate(unit16, u, pts), 1 + 2 * pts[:, 0] - 0.5 * pts[:, 1], atol=1e-13)
    np.testing.assert_allclose(element_gradients(unit16, u), np.tile([2.0, -0.5], (unit16.n_elements, 1)), atol=1e-12)
    L = patch_gradient_functional(unit16, (0.5, 0.5))
    np.testing.assert_allclose(L @ u, [2.0, -0.5], atol=1e-12)


def test_json_round_trip(unit16):
    text = unit16.to_json()
    g2 = Grid.from_json(text)
    assert json.loads(text)["resolution"] == [16, 16]
    np.testing.assert_array_equal(g2.nodes, unit16.nodes)
    np.testing.assert_array_equal(g2.elements, unit16.elements)
    np.testing.assert_array_equal(g2.boundary_edges, unit16.boundary_edges)
    assert abs(g2.stiffness - unit16.stiffness).max() == 0.0
