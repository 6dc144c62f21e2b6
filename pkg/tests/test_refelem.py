import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from entropy_dg.errors import IllConditionedBasis, InvalidArgument, UnsupportedDegree
from entropy_dg.refelem import (
    INTERVAL,
    TRIANGLE,
    basis_eval,
    basis_grad_eval,
    build_operator_set,
    gauss_legendre,
    gauss_lobatto,
    operators,
    reference_element,
    triangle_quadrature,
    verify_sbp,
)

INTERVAL_CASES = [(N, q) for N in range(1, 6) for q in ("gll", "gauss1", "gauss2")]
TRIANGLE_CASES = [(N, "tri2n") for N in range(1, 5)]


def tri_monomial(a, b):
    """Exact integral of x^a y^b over the triangle (-1,-1), (1,-1), (-1,1)."""
    val, _ = integrate.dblquad(lambda y, x: x ** a * y ** b, -1, 1, lambda x: -1, lambda x: -x,
                               epsabs=1e-14, epsrel=1e-14)
    return val


# -- quadrature ---------------------------------------------------------------


def test_gauss_legendre_small_rules():
    r = gauss_legendre(1)
    assert r.points[:, 0] == pytest.approx([0.0])
    assert r.weights == pytest.approx([2.0])
    r = gauss_legendre(2)
    assert np.sort(r.points[:, 0]) == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)], abs=1e-15)
    assert r.weights == pytest.approx([1.0, 1.0], abs=1e-15)


def test_gauss_legendre_x8():
    r = gauss_legendre(5)
    assert abs(r.integrate(r.points[:, 0] ** 8) - 2 / 9) < 1e-14


@pytest.mark.parametrize("n", range(1, 12))
def test_gauss_legendre_exactness_and_symmetry(n):
    r = gauss_legendre(n)
    assert r.exactness_degree == 2 * n - 1
    x = r.points[:, 0]
    assert np.all(np.abs(x) < 1)
    assert np.allclose(np.sort(x), -np.sort(x)[::-1], atol=0)
    assert abs(r.weights.sum() - 2) < 1e-13
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(r.integrate(x ** k) - exact) < 1e-12 * max(1, exact)


def test_gauss_lobatto_small_rules():
    r = gauss_lobatto(2)
    assert r.points[:, 0] == pytest.approx([-1, 1])
    assert r.weights == pytest.approx([1, 1])
    r = gauss_lobatto(3)
    assert r.points[:, 0] == pytest.approx([-1, 0, 1], abs=1e-15)
    assert r.weights == pytest.approx([1 / 3, 4 / 3, 1 / 3], abs=1e-15)


def test_gauss_lobatto_degree9():
    r = gauss_lobatto(6)
    assert r.exactness_degree == 9
    x = r.points[:, 0]
    assert x[0] == -1 and x[-1] == 1
    for k in range(10):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(r.integrate(x ** k) - exact) < 1e-13


@pytest.mark.parametrize("bad, fn", [(0, gauss_legendre), (1, gauss_lobatto), (0, gauss_lobatto)])
def test_rule_size_errors(bad, fn):
    with pytest.raises(InvalidArgument):
        fn(bad)


def test_triangle_centroid_rule():
    r = triangle_quadrature(1)
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-13)
    assert r.points.mean(axis=0) == pytest.approx([-1 / 3, -1 / 3])


def test_triangle_degree4_monomials():
    r = triangle_quadrature(4)
    x, y = r.points.T
    for a in range(5):
        for b in range(5 - a):
            assert abs(r.integrate(x ** a * y ** b) - tri_monomial(a, b)) < 1e-13


@pytest.mark.parametrize("deg", range(1, 13))
def test_triangle_rules_positive_and_exact(deg):
    r = triangle_quadrature(deg)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 2.0) < 1e-13
    assert r.exactness_degree >= deg
    x, y = r.points.T
    a, b = deg // 2, deg - deg // 2
    assert abs(r.integrate(x ** a * y ** b) - tri_monomial(a, b)) < 1e-12


def test_triangle_rule_degree_limit():
    with pytest.raises(UnsupportedDegree):
        triangle_quadrature(13)


# -- reference elements and bases ----------------------------------------------


@pytest.mark.parametrize("N", range(1, 6))
def test_basis_dimension(N):
    assert reference_element(INTERVAL, N, "gauss2").Np == N + 1
    assert reference_element(TRIANGLE, N, "tri2n").Np == (N + 1) * (N + 2) // 2


def test_reference_element_errors():
    with pytest.raises(InvalidArgument):
        reference_element(INTERVAL, 0)
    with pytest.raises(InvalidArgument):
        reference_element(TRIANGLE, 2, "gll")
    with pytest.raises(InvalidArgument):
        reference_element("tet", 2)


@pytest.mark.parametrize("N, quad", INTERVAL_CASES + TRIANGLE_CASES)
def test_surface_rule_strength(N, quad):
    elem = reference_element(TRIANGLE if quad == "tri2n" else INTERVAL, N, quad)
    need = 2 * N - 1 if quad == "gll" else 2 * N
    assert elem.volume.exactness_degree >= 2 * N - 1
    if quad != "gll":
        assert elem.volume.exactness_degree >= need
    assert elem.surface_exactness >= 2 * N
    # one face per point, constant normal per face
    for f in range(elem.num_faces):
        n = elem.normals[elem.face_of_point == f]
        assert np.allclose(n, n[0])
    assert abs(np.linalg.norm(elem.normals, axis=1) - 1).max() < 1e-15


def test_surface_weights_carry_face_jacobian():
    elem = reference_element(TRIANGLE, 3, "tri2n")
    assert elem.surface_weights.sum() == pytest.approx(4 + 2 * math.sqrt(2), abs=1e-13)


def test_constant_mode_and_origin_row():
    elem = reference_element(INTERVAL, 1, "gauss2")
    assert basis_eval(elem, [[0.0]])[0] == pytest.approx([1 / math.sqrt(2), 0.0])
    tri = reference_element(TRIANGLE, 3, "tri2n")
    V = basis_eval(tri, tri.volume.points)
    assert np.allclose(V[:, 0], 1 / math.sqrt(2), atol=1e-14)


@pytest.mark.parametrize("N, quad", [(N, q) for N, q in INTERVAL_CASES if q != "gll"]
                         + TRIANGLE_CASES)
def test_orthonormal_mass_matrix(N, quad):
    ops = operators(TRIANGLE if quad == "tri2n" else INTERVAL, N, quad)
    assert np.abs(ops.M - np.eye(ops.elem.Np)).max() < 1e-12


def test_gll_mass_matrix_spd():
    ops = operators(INTERVAL, 2, "gll")
    assert np.allclose(ops.M, ops.M.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(ops.M) > 0)
    assert np.abs(ops.Pq @ ops.Vq - np.eye(3)).max() < 1e-13


@pytest.mark.parametrize("kind, N", [(INTERVAL, 4), (TRIANGLE, 3)])
def test_basis_gradient_central_difference(kind, N):
    elem = reference_element(kind, N, "tri2n" if kind == TRIANGLE else "gauss2")
    rng = np.random.default_rng(1)
    if kind == INTERVAL:
        pts = rng.uniform(-0.9, 0.9, (10, 1))
    else:
        a, b = rng.uniform(0.05, 0.9, (2, 10))
        keep = a + b < 0.95
        pts = np.stack([2 * a[keep] - 1, 2 * b[keep] - 1], axis=1)
    grads = basis_grad_eval(elem, pts)
    h = 1e-5
    for i in range(elem.dim):
        e = np.zeros(elem.dim)
        e[i] = h
        fd = (basis_eval(elem, pts + e) - basis_eval(elem, pts - e)) / (2 * h)
        assert np.abs(fd - grads[i]).max() < 1e-6
        assert np.abs(grads[i][:, 0]).max() < 1e-13


def test_gradient_in_span():
    elem = reference_element(TRIANGLE, 3, "tri2n")
    V = basis_eval(elem, elem.volume.points)
    for g in basis_grad_eval(elem, elem.volume.points):
        coef, *_ = np.linalg.lstsq(V, g, rcond=None)
        assert np.abs(V @ coef - g).max() < 1e-12


# -- operators ------------------------------------------------------------------


@pytest.mark.parametrize("N, quad", INTERVAL_CASES + TRIANGLE_CASES)
def test_verify_sbp_all_identities(N, quad):
    ops = operators(TRIANGLE if quad == "tri2n" else INTERVAL, N, quad)
    res = verify_sbp(ops)
    for key in ("quadrature_sbp", "sbp_like", "null_vector", "projection", "recovery"):
        assert res[key] < 1e-12, key


@pytest.mark.parametrize("N, quad", [(N, q) for N, q in INTERVAL_CASES if q == "gauss2"]
                         + TRIANGLE_CASES)
def test_weighted_derivative_identity(N, quad):
    ops = operators(TRIANGLE if quad == "tri2n" else INTERVAL, N, quad)
    assert verify_sbp(ops)["weighted_derivative"] < 1e-12


def test_weighted_derivative_polynomial_data():
    ops = operators(INTERVAL, 5, "gauss2")
    rng = np.random.default_rng(3)
    u = rng.standard_normal(6)
    w = rng.standard_normal(6)
    uh = ops.Vh @ u
    wh = ops.Vh @ w
    direct = ops.PL @ (wh * (ops.DN[0] @ uh))
    # for polynomial data D_N reduces to exact differentiation in the volume
    split = ops.Pq @ ((ops.Vq @ w) * (ops.Vq @ (ops.D[0] @ u)))
    assert np.abs(direct - split).max() < 1e-12


def test_corrupted_surface_weight_detected():
    elem = reference_element(INTERVAL, 3, "gauss2")
    w = np.array(elem.surface_weights)
    w[0] *= 0.5
    import dataclasses
    bad = dataclasses.replace(elem, surface_weights=w)
    res = verify_sbp(build_operator_set(bad))
    assert res["sbp_like"] > 1e-3


def test_surface_rows_of_DN_vanish():
    ops = operators(TRIANGLE, 3, "tri2n")
    u = np.random.default_rng(0).standard_normal(ops.elem.Np)
    for i in range(2):
        out = ops.DN[i] @ np.concatenate([ops.Vq @ u, ops.Vf @ u])
        assert np.abs(out[ops.Nq:]).max() < 1e-12
        assert np.abs(out[:ops.Nq] - ops.Vq @ ops.D[i] @ u).max() < 1e-12


@pytest.mark.parametrize("N, quad", [(3, "gll"), (4, "gauss2"), (3, "tri2n")])
def test_Dq_exact_on_polynomials(N, quad):
    ops = operators(TRIANGLE if quad == "tri2n" else INTERVAL, N, quad)
    x = ops.elem.volume.points
    if ops.elem.dim == 1:
        f = x[:, 0] ** N
        df = [N * x[:, 0] ** (N - 1)]
    else:
        f = x[:, 0] ** 2 * x[:, 1] ** (N - 2) + x[:, 1]
        df = [2 * x[:, 0] * x[:, 1] ** (N - 2),
              (N - 2) * x[:, 0] ** 2 * x[:, 1] ** max(N - 3, 0) + 1]
    for i in range(ops.elem.dim):
        assert np.abs(ops.Dq[i] @ f - df[i]).max() < 1e-11


def test_ill_conditioned_mass_rejected():
    elem = reference_element(INTERVAL, 4, "gauss2")
    # a 2-point volume rule cannot resolve a degree-4 space
    rule = gauss_legendre(2)
    with pytest.raises(IllConditionedBasis):
        build_operator_set(elem.with_volume_rule(rule))


def test_operators_are_read_only():
    ops = operators(INTERVAL, 2, "gauss2")
    with pytest.raises(ValueError):
        ops.Pq[0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.sampled_from(["gll", "gauss1", "gauss2"]),
       st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_recovery_on_random_coefficients(N, quad, coeffs):
    ops = operators(INTERVAL, N, quad)
    u = np.array(coeffs[:N + 1])
    lhs = ops.PL @ ops.DN[0] @ ops.Vh @ u
    assert np.abs(lhs - ops.D[0] @ u).max() < 1e-11 * (1 + np.abs(u).max())


def test_pairs_cover_surface_points():
    # every surface point belongs to a face and every face has N+1 points
    elem = reference_element(TRIANGLE, 2, "tri2n")
    counts = [int(np.sum(elem.face_of_point == f)) for f in range(3)]
    assert counts == [3, 3, 3]
    assert len(list(itertools.chain(elem.surface_points))) == 9
