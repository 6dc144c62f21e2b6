"""Affine meshes of intervals and bisected-quadrilateral triangles.

A :class:`Mesh` is tied to one reference element so that it can carry
per-surface-point geometry (physical normals, face Jacobians) and the
face-point connectivity ``mapP`` used to fetch exterior traces.

Conventions for the affine map ``x = A xhat + b`` of element k:

* ``J = det A`` (volume Jacobian, constant),
* ``G[i, j] = d xhat_j / d x_i``, i.e. ``G = inv(A).T``,
* ``Jf`` is physical face measure over the measure of the canonical face
  [-1, 1], so ``J G nhat Jf_hat = n Jf`` with unit physical normal ``n``,
* ``sJ = Jf / Jf_hat`` scales reference surface weights (which already
  include ``Jf_hat``) to physical ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument, InvalidMesh, NonconformingMesh
from .refelem import INTERVAL, TRIANGLE, ReferenceElement, reference_element


@dataclass(frozen=True)
class ElementGeometry:
    """Affine geometric factors of one element."""

    G: np.ndarray
    J: float
    Jf: np.ndarray
    normals: np.ndarray
    sJ: np.ndarray


def _affine(vertices, elem):
    v = np.asarray(vertices, dtype=float)
    if elem.kind == INTERVAL:
        A = np.array([[0.5 * (v[1, 0] - v[0, 0])]])
    else:
        A = 0.5 * np.column_stack([v[1] - v[0], v[2] - v[0]])
    b = v[0] - A @ elem.vertices[0]
    return A, b


def geometric_factors(vertices, elem: ReferenceElement) -> ElementGeometry:
    """Constant G, J and per-surface-point Jf, n for an affine element."""
    A, _ = _affine(vertices, elem)
    J = float(np.linalg.det(A))
    if not J > 0:
        raise InvalidMesh(f"element has non-positive Jacobian J={J:.3e} (inverted or degenerate)")
    G = np.linalg.inv(A).T
    scaled = J * (np.asarray(elem.normals) @ G.T)  # rows: J G nhat
    sJ = np.linalg.norm(scaled, axis=1)
    n = scaled / sJ[:, None]
    Jf = sJ * np.asarray(elem.face_jacobian)
    return ElementGeometry(G, J, Jf, n, sJ)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming affine mesh with surface-point connectivity.

    Array shapes (K elements, Nf surface points per element, d dims):
    ``vertices`` (K, d+1, d), ``J`` (K,), ``G`` (K, d, d), ``Jf``/``sJ``
    (K, Nf), ``normals`` (K, Nf, d), ``xf`` (K, Nf, d).  ``mapP[k, i]`` is the
    flat index ``k2 * Nf + i2`` of the exterior partner of point (k, i);
    boundary points map to themselves and are flagged in ``boundary``.
    """

    elem: ReferenceElement
    vertices: np.ndarray
    J: np.ndarray
    G: np.ndarray
    Jf: np.ndarray
    sJ: np.ndarray
    normals: np.ndarray
    xf: np.ndarray
    mapP: np.ndarray
    boundary: np.ndarray
    box: tuple
    periodic: tuple

    @property
    def K(self):
        return len(self.J)

    @property
    def dim(self):
        return self.elem.dim

    @property
    def h(self):
        """CFL mesh size: min over elements of 2 J / max(Jf)."""
        return float(np.min(2.0 * self.J / self.Jf.max(axis=1)))

    def map_points(self, ref_points) -> np.ndarray:
        """Physical images (K, n, d) of reference points (n, d)."""
        r = np.asarray(ref_points, dtype=float).reshape(-1, self.dim)
        v0 = self.elem.vertices[0]
        A = np.linalg.inv(np.swapaxes(self.G, 1, 2))  # G = inv(A).T
        return self.vertices[:, None, 0, :] + np.einsum("kij,nj->kni", A, r - v0)

    def geometry(self, k) -> ElementGeometry:
        return ElementGeometry(self.G[k], float(self.J[k]), self.Jf[k], self.normals[k],
                               self.sJ[k])

    def summary(self) -> str:
        per = ",".join("periodic" if p else "bounded" for p in self.periodic)
        lines = [
            f"element: {self.elem.kind} N={self.elem.N} quadrature={self.elem.quadrature}",
            f"elements: {self.K}",
            f"box: {self.box}",
            f"boundaries: {per}",
            f"h: {self.h:.6g}",
            f"J range: [{self.J.min():.6g}, {self.J.max():.6g}]",
            f"boundary points: {int(self.boundary.sum())}",
        ]
        return "\n".join(lines) + "\n"


def _assemble(vertices, elem, box, periodic):
    geo = [geometric_factors(v, elem) for v in vertices]
    J = np.array([g.J for g in geo])
    G = np.stack([g.G for g in geo])
    Jf = np.stack([g.Jf for g in geo])
    sJ = np.stack([g.sJ for g in geo])
    n = np.stack([g.normals for g in geo])
    mesh = Mesh(elem, np.asarray(vertices, float), J, G, Jf, sJ, n,
                np.zeros(Jf.shape + (elem.dim,)), np.zeros(Jf.shape, dtype=np.int64),
                np.zeros(Jf.shape, dtype=bool), tuple(box), tuple(periodic))
    xf = mesh.map_points(elem.surface_points)
    mapP, boundary = connect_faces(xf, n, box, periodic)
    for name, val in (("xf", xf), ("mapP", mapP), ("boundary", boundary)):
        val.flags.writeable = False
        object.__setattr__(mesh, name, val)
    return mesh


def build_mesh_1d(K: int, a: float = -1.0, b: float = 1.0, periodic: bool = True,
                  elem: ReferenceElement | None = None) -> Mesh:
    """Uniform mesh of K intervals on [a, b]."""
    if K < 1 or not a < b:
        raise InvalidArgument(f"need K >= 1 and a < b, got K={K}, [{a}, {b}]")
    if elem is None:
        elem = reference_element(INTERVAL, 1, "gauss2")
    if elem.kind != INTERVAL:
        raise InvalidArgument("1D mesh needs an interval reference element")
    x = np.linspace(a, b, K + 1)
    verts = np.stack([x[:-1], x[1:]], axis=1)[:, :, None]
    return _assemble(verts, elem, ((a, b),), (bool(periodic),))


def build_tri_mesh(Kx: int, Ky: int, box=((0.0, 1.0), (0.0, 1.0)), periodic=(True, True),
                   elem: ReferenceElement | None = None) -> Mesh:
    """Kx x Ky uniform quadrilaterals, each split into two right triangles."""
    (x0, x1), (y0, y1) = box
    if Kx < 1 or Ky < 1 or not x0 < x1 or not y0 < y1:
        raise InvalidArgument(f"degenerate triangle mesh request Kx={Kx}, Ky={Ky}, box={box}")
    if elem is None:
        elem = reference_element(TRIANGLE, 1, "tri2n")
    if elem.kind != TRIANGLE:
        raise InvalidArgument("triangle mesh needs a triangle reference element")
    if np.ndim(periodic) == 0:
        periodic = (bool(periodic), bool(periodic))
    xs = np.linspace(x0, x1, Kx + 1)
    ys = np.linspace(y0, y1, Ky + 1)
    verts = []
    for j in range(Ky):
        for i in range(Kx):
            a = (xs[i], ys[j])
            b = (xs[i + 1], ys[j])
            c = (xs[i + 1], ys[j + 1])
            d = (xs[i], ys[j + 1])
            verts.append((a, b, d))
            verts.append((c, d, b))
    box = ((float(x0), float(x1)), (float(y0), float(y1)))
    return _assemble(np.array(verts), elem, box, tuple(bool(p) for p in periodic))


def connect_faces(xf, normals, box, periodic):
    """Match surface points by physical coordinates.

    Periodic directions are folded onto the fundamental box before
    matching.  Returns ``(mapP, boundary)`` as described on :class:`Mesh`.
    """
    K, Nf, d = xf.shape
    pts = xf.reshape(-1, d).copy()
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    L = hi - lo
    h = np.min(L) / max(K, 1)
    tol = 1e-10 * max(np.max(L), 1.0)
    on_bdry = np.zeros(len(pts), dtype=bool)
    for i in range(d):
        at_edge = (np.abs(pts[:, i] - lo[i]) < tol) | (np.abs(pts[:, i] - hi[i]) < tol)
        if periodic[i]:
            pts[:, i] = np.where(np.abs(pts[:, i] - hi[i]) < tol, lo[i], pts[:, i])
        else:
            on_bdry |= at_edge
    tree = cKDTree(pts)
    pairs = tree.query_ball_point(pts, r=max(tol, 1e-10 * h))
    mapP = np.arange(len(pts))
    for p, cand in enumerate(pairs):
        others = [q for q in cand if q != p]
        if len(others) == 1:
            mapP[p] = others[0]
        elif len(others) > 1:
            raise NonconformingMesh(f"surface point {divmod(p, Nf)} has {len(others)} partners")
        elif not on_bdry[p]:
            raise NonconformingMesh(f"interior surface point {divmod(p, Nf)} has no partner")
    if np.any(mapP[mapP] != np.arange(len(pts))):
        raise NonconformingMesh("face connectivity is not an involution")
    boundary = mapP == np.arange(len(pts))
    nflat = normals.reshape(-1, d)
    inner = ~boundary
    if np.any(np.abs(nflat[inner] + nflat[mapP[inner]]) > 1e-12):
        raise NonconformingMesh("matched surface points do not have opposite normals")
    return mapP.reshape(K, Nf), boundary.reshape(K, Nf)
