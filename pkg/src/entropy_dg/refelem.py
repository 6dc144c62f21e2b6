"""Reference elements, quadrature rules and quadrature-based DG matrices.

Everything here lives on a single reference element: the interval [-1, 1]
or the bi-unit right triangle with vertices (-1,-1), (1,-1), (-1,1).  The
basis is L2-orthonormal (normalized Legendre on the interval, the
Koornwinder-Dubiner basis on the triangle), so the mass matrix is the
identity whenever the volume rule integrates degree 2N exactly.

The main product is :class:`OperatorSet`, which bundles the projection,
lifting and differentiation matrices together with the decoupled
volume/surface operator ``DN`` and its weak form ``QN = WN @ DN``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import IllConditionedBasis, InvalidArgument, UnsupportedDegree

INTERVAL = "interval"
TRIANGLE = "triangle"

#: Quadrature modes understood by :func:`reference_element`.
QUADRATURE_MODES = ("gll", "gauss1", "gauss2", "tri2n")

MAX_TRIANGLE_DEGREE = 12
MAX_MASS_CONDITION = 1e8


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n, d) and positive weights on a reference element."""

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def size(self):
        return len(self.weights)

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


# ----------------------------------------------------------------------------
# 1D rules


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1], exact to degree 2n-1."""
    if n < 1:
        raise InvalidArgument(f"Gauss-Legendre rule needs n >= 1, got {n}")
    x, w = special.roots_legendre(n)
    # enforce exact symmetry about the origin
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(_frozen(x[:, None]), _frozen(w), 2 * n - 1)


def gauss_lobatto(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre-Lobatto rule on [-1, 1], exact to degree 2n-3.

    The interior nodes are the Gauss-Jacobi(1, 1) nodes; the weights are
    2 / (n (n-1) P_{n-1}(x)^2).
    """
    if n < 2:
        raise InvalidArgument(f"Gauss-Lobatto rule needs n >= 2, got {n}")
    if n == 2:
        x = np.array([-1.0, 1.0])
    else:
        xi, _ = special.roots_jacobi(n - 2, 1.0, 1.0)
        x = np.concatenate([[-1.0], xi, [1.0]])
    x = 0.5 * (x - x[::-1])
    w = 2.0 / (n * (n - 1) * special.eval_legendre(n - 1, x) ** 2)
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(_frozen(x[:, None]), _frozen(w), 2 * n - 3)


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Positive-weight symmetric rule on the bi-unit triangle (area 2).

    Uses the Xiao-Gimbutas tables shipped with modepy.  Degrees above
    ``MAX_TRIANGLE_DEGREE`` are rejected rather than falling back to rules
    with negative weights.
    """
    if degree < 0 or degree > MAX_TRIANGLE_DEGREE:
        raise UnsupportedDegree(
            f"triangle rules are tabulated for degree 0..{MAX_TRIANGLE_DEGREE}, "
            f"got {degree}")
    import modepy

    q = modepy.XiaoGimbutasSimplexQuadrature(max(degree, 1), 2)
    w = np.asarray(q.weights, dtype=float)
    if np.any(w <= 0):
        raise UnsupportedDegree(f"tabulated degree-{degree} rule has non-positive weights")
    # the tables carry ~1e-15 drift in the weight sum; remove it
    w = w * (2.0 / w.sum())
    return QuadratureRule(_frozen(np.asarray(q.nodes, dtype=float).T), _frozen(w),
                          int(q.exact_to))


# ----------------------------------------------------------------------------
# orthonormal bases


def _jacobi_normalized(x, alpha, beta, n):
    """Jacobi polynomial normalized to unit L2 norm under (1-x)^a (1+x)^b."""
    lg = ((alpha + beta + 1) * np.log(2.0) - np.log(2 * n + alpha + beta + 1)
          + special.gammaln(n + alpha + 1) + special.gammaln(n + beta + 1)
          - special.gammaln(n + alpha + beta + 1) - special.gammaln(n + 1))
    return special.eval_jacobi(n, alpha, beta, x) / np.exp(0.5 * lg)


def _jacobi_normalized_deriv(x, alpha, beta, n):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + alpha + beta + 1.0)) * _jacobi_normalized(
        x, alpha + 1, beta + 1, n - 1)


def _collapse(rs):
    r, s = rs[:, 0], rs[:, 1]
    denom = 1.0 - s
    top = np.abs(denom) < 1e-14
    a = np.where(top, -1.0, 2.0 * (1.0 + r) / np.where(top, 1.0, denom) - 1.0)
    return a, s


def triangle_mode_indices(N):
    return [(i, j) for i in range(N + 1) for j in range(N + 1 - i)]


def _triangle_modes(rs, N):
    a, b = _collapse(rs)
    cols = []
    for i, j in triangle_mode_indices(N):
        h1 = _jacobi_normalized(a, 0, 0, i)
        h2 = _jacobi_normalized(b, 2 * i + 1, 0, j)
        cols.append(np.sqrt(2.0) * h1 * h2 * (1.0 - b) ** i)
    return np.stack(cols, axis=1)


def _triangle_mode_grads(rs, N):
    a, b = _collapse(rs)
    dr_cols, ds_cols = [], []
    for i, j in triangle_mode_indices(N):
        fa = _jacobi_normalized(a, 0, 0, i)
        dfa = _jacobi_normalized_deriv(a, 0, 0, i)
        gb = _jacobi_normalized(b, 2 * i + 1, 0, j)
        dgb = _jacobi_normalized_deriv(b, 2 * i + 1, 0, j)
        half = 0.5 * (1.0 - b)
        dr = dfa * gb
        ds = dfa * (gb * 0.5 * (1.0 + a))
        if i > 0:
            dr = dr * half ** (i - 1)
            ds = ds * half ** (i - 1)
        tmp = dgb * half ** i
        if i > 0:
            tmp = tmp - 0.5 * i * gb * half ** (i - 1)
        ds = ds + fa * tmp
        scale = 2.0 ** (i + 0.5)
        dr_cols.append(scale * dr)
        ds_cols.append(scale * ds)
    return np.stack(dr_cols, axis=1), np.stack(ds_cols, axis=1)


# ----------------------------------------------------------------------------
# reference element


@dataclass(frozen=True)
class ReferenceElement:
    """Degree-N reference element with its volume and surface rules.

    Surface weights already contain the reference face Jacobian ``Jf_hat``
    (ratio of a face's length to the length of the canonical face [-1, 1]),
    so ``sum(surface_weights)`` is the perimeter of the reference element.
    """

    kind: str
    N: int
    volume: QuadratureRule
    surface_points: np.ndarray
    surface_weights: np.ndarray
    normals: np.ndarray
    face_jacobian: np.ndarray
    face_of_point: np.ndarray
    num_faces: int
    surface_exactness: int
    quadrature: str = "custom"

    @property
    def dim(self):
        return 1 if self.kind == INTERVAL else 2

    @property
    def Np(self):
        if self.kind == INTERVAL:
            return self.N + 1
        return (self.N + 1) * (self.N + 2) // 2

    @property
    def Nq(self):
        return self.volume.size

    @property
    def Nf(self):
        return len(self.surface_weights)

    @property
    def measure(self):
        return 2.0

    @property
    def vertices(self):
        if self.kind == INTERVAL:
            return np.array([[-1.0], [1.0]])
        return np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])

    def with_volume_rule(self, rule):
        return dataclasses.replace(self, volume=rule, quadrature="custom")


def _interval_surface():
    pts = np.array([[-1.0], [1.0]])
    normals = np.array([[-1.0], [1.0]])
    ones = np.ones(2)
    return pts, ones, normals, ones, np.array([0, 1])


def _triangle_surface(n_edge):
    edge = gauss_legendre(n_edge)
    t = edge.points[:, 0]
    w = edge.weights
    # faces: bottom (s=-1), hypotenuse (r+s=0), left (r=-1); each traversed
    # counterclockwise
    faces = [
        (np.array([-1.0, -1.0]), np.array([1.0, -1.0]), np.array([0.0, -1.0]), 1.0),
        (np.array([1.0, -1.0]), np.array([-1.0, 1.0]),
         np.array([1.0, 1.0]) / np.sqrt(2.0), np.sqrt(2.0)),
        (np.array([-1.0, 1.0]), np.array([-1.0, -1.0]), np.array([-1.0, 0.0]), 1.0),
    ]
    pts, wts, nrm, jac, fid = [], [], [], [], []
    for f, (v0, v1, n, jf) in enumerate(faces):
        pts.append(v0[None, :] + 0.5 * (t[:, None] + 1.0) * (v1 - v0)[None, :])
        wts.append(w * jf)
        nrm.append(np.tile(n, (n_edge, 1)))
        jac.append(np.full(n_edge, jf))
        fid.append(np.full(n_edge, f))
    return (np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm),
            np.concatenate(jac), np.concatenate(fid)), edge.exactness_degree


def reference_element(kind: str, N: int, quadrature: str = "gauss2") -> ReferenceElement:
    """Build a reference element for one of the supported quadrature modes.

    ``quadrature`` is ``"gll"`` (N+1 point Lobatto, interval only),
    ``"gauss1"`` (N+1 point Gauss), ``"gauss2"`` (N+2 point Gauss) or
    ``"tri2n"`` (degree-2N triangle rule with (N+1)-point Gauss edges).
    """
    if N < 1:
        raise InvalidArgument(f"polynomial degree must be >= 1, got {N}")
    if kind == INTERVAL:
        if quadrature == "gll":
            vol = gauss_lobatto(N + 1)
        elif quadrature == "gauss1":
            vol = gauss_legendre(N + 1)
        elif quadrature == "gauss2":
            vol = gauss_legendre(N + 2)
        else:
            raise InvalidArgument(f"quadrature {quadrature!r} not available on the interval")
        pts, wts, nrm, jac, fid = _interval_surface()
        # point evaluation on the boundary is exact for any degree
        return ReferenceElement(INTERVAL, N, vol, _frozen(pts), _frozen(wts), _frozen(nrm),
                                _frozen(jac), np.asarray(fid), 2, 10**6, quadrature)
    if kind == TRIANGLE:
        if quadrature != "tri2n":
            raise InvalidArgument(f"quadrature {quadrature!r} not available on the triangle")
        vol = triangle_quadrature(2 * N)
        (pts, wts, nrm, jac, fid), sdeg = _triangle_surface(N + 1)
        return ReferenceElement(TRIANGLE, N, vol, _frozen(pts), _frozen(wts), _frozen(nrm),
                                _frozen(jac), np.asarray(fid), 3, sdeg, "tri2n")
    raise InvalidArgument(f"unknown element type {kind!r}")


def basis_eval(elem: ReferenceElement, points) -> np.ndarray:
    """Vandermonde-type matrix: row i, column j holds phi_j(points[i]).

    Points outside the reference element are evaluated by polynomial
    extrapolation; no check is made.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if elem.kind == INTERVAL:
        x = x.reshape(-1, 1)[:, 0]
        return np.stack([_jacobi_normalized(x, 0, 0, j) for j in range(elem.N + 1)], axis=1)
    return _triangle_modes(x.reshape(-1, 2), elem.N)


def basis_grad_eval(elem: ReferenceElement, points) -> list[np.ndarray]:
    """Derivatives of the basis along each reference coordinate."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if elem.kind == INTERVAL:
        x = x.reshape(-1, 1)[:, 0]
        return [np.stack([_jacobi_normalized_deriv(x, 0, 0, j) for j in range(elem.N + 1)],
                         axis=1)]
    return list(_triangle_mode_grads(x.reshape(-1, 2), elem.N))


# ----------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class OperatorSet:
    """Quadrature-based matrices for one (element, N, quadrature) triple.

    Direction-indexed quantities (``D``, ``Dq``, ``DN``, ``QN``, ``BN``) are
    tuples with one matrix per reference coordinate.  The combined
    volume+surface point set ("hybrid" points) orders the Nq volume points
    first, then the Nf surface points.
    """

    elem: ReferenceElement
    W: np.ndarray
    Wf: np.ndarray
    Vq: np.ndarray
    Vf: np.ndarray
    M: np.ndarray
    Minv: np.ndarray
    Pq: np.ndarray
    Lq: np.ndarray
    D: tuple
    Dq: tuple
    DN: tuple
    QN: tuple
    BN: tuple
    WN: np.ndarray

    @property
    def Nq(self):
        return self.elem.Nq

    @property
    def Nf(self):
        return self.elem.Nf

    @property
    def Nh(self):
        return self.elem.Nq + self.elem.Nf

    @property
    def Vh(self):
        """Interpolation to volume then surface points, ``[Vq; Vf]``."""
        return np.vstack([self.Vq, self.Vf])

    @property
    def PL(self):
        """The projection-lifting pair ``[Pq, Lq]``."""
        return np.hstack([self.Pq, self.Lq])


def build_operator_set(elem: ReferenceElement) -> OperatorSet:
    wq = np.asarray(elem.volume.weights)
    wf = np.asarray(elem.surface_weights)
    if np.any(wq <= 0) or np.any(wf <= 0):
        raise InvalidArgument("quadrature weights must be positive")
    Vq = basis_eval(elem, elem.volume.points)
    Vf = basis_eval(elem, elem.surface_points)
    W = np.diag(wq)
    Wf = np.diag(wf)
    M = Vq.T @ W @ Vq
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_MASS_CONDITION:
        raise IllConditionedBasis(f"mass matrix condition number {cond:.3e} exceeds "
                                  f"{MAX_MASS_CONDITION:.0e}")
    Minv = np.linalg.inv(M)
    Minv = 0.5 * (Minv + Minv.T)
    Pq = Minv @ Vq.T @ W
    Lq = Minv @ Vf.T @ Wf
    grads = basis_grad_eval(elem, elem.volume.points)
    Nq, Nf = elem.Nq, elem.Nf
    WN = np.diag(np.concatenate([wq, wf]))
    D, Dq, DN, QN, BN = [], [], [], [], []
    VfPq = Vf @ Pq
    for i in range(elem.dim):
        Di = Pq @ grads[i]
        Dqi = Vq @ Di @ Pq
        n = np.diag(elem.normals[:, i])
        DNi = np.zeros((Nq + Nf, Nq + Nf))
        DNi[:Nq, :Nq] = Dqi - 0.5 * Vq @ Lq @ n @ VfPq
        DNi[:Nq, Nq:] = 0.5 * Vq @ Lq @ n
        DNi[Nq:, :Nq] = -0.5 * n @ VfPq
        DNi[Nq:, Nq:] = 0.5 * n
        Bi = np.zeros_like(DNi)
        Bi[Nq:, Nq:] = Wf @ n
        D.append(_frozen(Di))
        Dq.append(_frozen(Dqi))
        DN.append(_frozen(DNi))
        QN.append(_frozen(WN @ DNi))
        BN.append(_frozen(Bi))
    return OperatorSet(elem, _frozen(W), _frozen(Wf), _frozen(Vq), _frozen(Vf), _frozen(M),
                       _frozen(Minv), _frozen(Pq), _frozen(Lq), tuple(D), tuple(Dq), tuple(DN),
                       tuple(QN), tuple(BN), _frozen(WN))


def operators(kind: str, N: int, quadrature: str = "gauss2") -> OperatorSet:
    return build_operator_set(reference_element(kind, N, quadrature))


# ----------------------------------------------------------------------------
# self-verification


def _smooth_samples(x):
    """Two smooth non-polynomial test functions evaluated at points x (n, d)."""
    s = x.sum(axis=1)
    u = np.exp(0.7 * s) * np.sin(1.3 * x[:, 0] + 0.4)
    w = np.cos(0.9 * s) + 0.25 * x[:, -1] ** 2
    return u, w


def verify_sbp(ops: OperatorSet) -> dict:
    """Max-abs residuals of the operator identities, keyed by name.

    ``"quadrature_sbp"``
        W Dq + (W Dq)^T - Pq^T Vf^T Wf diag(n) Vf Pq
    ``"sbp_like"``
        QN + QN^T - BN
    ``"null_vector"``
        QN @ 1
    ``"projection"``
        Pq Vq - I
    ``"recovery"``
        [Pq Lq] DN [Vq; Vf] - D
    ``"weighted_derivative"``
        [Pq Lq] diag(w) DN [u_q; u_f] against the same quantity assembled
        from separate projection, differentiation and lifting steps, for
        smooth non-polynomial u and w.

    Each entry is the maximum over reference directions.
    """
    elem = ops.elem
    Np = elem.Np
    res = {k: 0.0 for k in ("quadrature_sbp", "sbp_like", "null_vector", "projection",
                            "recovery", "weighted_derivative")}
    res["projection"] = float(np.abs(ops.Pq @ ops.Vq - np.eye(Np)).max())
    one = np.ones(ops.Nh)
    VfPq = ops.Vf @ ops.Pq
    uq, wq = _smooth_samples(np.asarray(elem.volume.points))
    uf, wf = _smooth_samples(np.asarray(elem.surface_points))
    uh = np.concatenate([uq, uf])
    wh = np.concatenate([wq, wf])
    for i in range(elem.dim):
        WDq = ops.W @ ops.Dq[i]
        n = np.diag(elem.normals[:, i])
        sbp = WDq + WDq.T - VfPq.T @ ops.Wf @ n @ VfPq
        res["quadrature_sbp"] = max(res["quadrature_sbp"], float(np.abs(sbp).max()))
        sbp = ops.QN[i] + ops.QN[i].T - ops.BN[i]
        res["sbp_like"] = max(res["sbp_like"], float(np.abs(sbp).max()))
        res["null_vector"] = max(res["null_vector"], float(np.abs(ops.QN[i] @ one).max()))
        rec = ops.PL @ ops.DN[i] @ ops.Vh - ops.D[i]
        res["recovery"] = max(res["recovery"], float(np.abs(rec).max()))

        direct = ops.PL @ (wh * (ops.DN[i] @ uh))
        # projection / lifting route: Pi(w (d Pi u + L(u - Pi u))) + L(w (u - Pi u))
        coeff = ops.Pq @ uq
        jump = 0.5 * elem.normals[:, i] * (uf - ops.Vf @ coeff)
        dvol = ops.Vq @ (ops.D[i] @ coeff) + ops.Vq @ (ops.Lq @ jump)
        split = ops.Pq @ (wq * dvol) + ops.Lq @ (wf * jump)
        res["weighted_derivative"] = max(res["weighted_derivative"],
                                         float(np.abs(direct - split).max()))
    return res
