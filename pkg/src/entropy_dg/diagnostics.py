"""Entropy accounting, error norms, conservation residuals and exact solutions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import OracleFailure
from .physics import Euler
from .refelem import INTERVAL, basis_eval, gauss_legendre, triangle_quadrature


# ----------------------------------------------------------------------------
# integrals over the mesh


def _quad_values(uh, disc):
    return disc.ops.Vq @ uh


def integrate(disc, values):
    """Sum over elements of J * w^T values, values shaped (K, Nq, ...)."""
    w = np.asarray(disc.ops.elem.volume.weights)
    return np.einsum("k,q,kq...->...", disc.mesh.J, w, values)


def total_entropy(uh, disc) -> float:
    """Quadrature approximation of the integral of U(u_h)."""
    uq = _quad_values(uh, disc)
    return float(integrate(disc, disc.model.entropy(uq)))


def conserved_totals(uh, disc) -> np.ndarray:
    return integrate(disc, _quad_values(uh, disc))


def entropy_residual_delta(uh, disc, du=None) -> float:
    """|sum_k J v_h^T M du_h/dt| with v_h the projected entropy variables.

    Equals the instantaneous rate of change of total entropy; zero for the
    entropy conservative flux on periodic meshes.
    """
    proj = disc.entropy_project(uh)
    if du is None:
        du = disc.volume_rhs(proj.utilde) + disc.interface_rhs(proj.utilde)
    Mdu = disc.ops.M @ du
    return float(abs(np.einsum("k,kpv,kpv->", disc.mesh.J, proj.vh, Mdu)))


def local_conservation_residual(uh, disc, du=None, fstar_n=None) -> np.ndarray:
    """Per-element J 1^T W Vq du + sum_f wf sJ f*_n, shape (K, nvars).

    ``fstar_n`` overrides the numerical flux used for bookkeeping (for
    negative controls); by default it is recomputed from the state.
    """
    proj = disc.entropy_project(uh)
    if du is None:
        du = disc.volume_rhs(proj.utilde) + disc.interface_rhs(proj.utilde)
    if fstar_n is None:
        fstar_n, _ = disc.normal_fluxes(proj.utilde)
    w = np.asarray(disc.ops.elem.volume.weights)
    wf = np.asarray(disc.ops.elem.surface_weights)
    vol = disc.mesh.J[:, None] * np.einsum("q,kqv->kv", w, disc.ops.Vq @ du)
    surf = np.einsum("f,kf,kfv->kv", wf, disc.mesh.sJ, fstar_n)
    return vol + surf


def interface_entropy_production(uh, disc) -> np.ndarray:
    """Entropy production sum_f wf sJ (v~_f^T f*_n - psi_n) at each surface point.

    Adding a point and its exterior partner gives the contribution of that
    interface point to -dU/dt: zero for entropy conservative fluxes and
    non-negative with Lax-Friedrichs penalization.  Shape (K, Nf).
    """
    proj = disc.entropy_project(uh)
    Nq = disc.ops.Nq
    fstar_n, _ = disc.normal_fluxes(proj.utilde)
    vf = proj.vtilde[:, Nq:]
    psi_n = np.einsum("kfi,kfi->kf", disc.mesh.normals, disc.model.potential(proj.utilde[:, Nq:]))
    wf = np.asarray(disc.ops.elem.surface_weights)
    return wf * disc.mesh.sJ * (np.einsum("kfv,kfv->kf", vf, fstar_n) - psi_n)


def min_density_pressure(uh, disc):
    if not isinstance(disc.model, Euler):
        return float("nan"), float("nan")
    proj = disc.entropy_project(uh)
    pts = np.concatenate([proj.uq, proj.utilde], axis=1)
    return float(pts[..., 0].min()), float(disc.model.pressure(pts).min())


@dataclass
class EntropyLedger:
    """Time series of entropy and conservation diagnostics."""

    rows: list = field(default_factory=list)

    columns = ("t", "total_entropy", "delta_U", "delta", "conservation_residual",
               "conserved_drift", "min_density", "min_pressure")

    def record(self, row: dict):
        if self.rows:
            row["delta_U"] = abs(row["total_entropy"] - self.rows[0]["total_entropy"])
        else:
            row["delta_U"] = 0.0
        self.rows.append(row)

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(float(r.get(c, np.nan))) for c in self.columns])


def standard_observer(track_delta=False, ledger: EntropyLedger | None = None):
    """Observer for :func:`solver.run` filling an :class:`EntropyLedger`."""
    ledger = ledger if ledger is not None else EntropyLedger()
    first = {}

    def observe(state, disc):
        uh = state.uh
        proj = disc.entropy_project(uh, state.t)
        du = disc.volume_rhs(proj.utilde) + disc.interface_rhs(proj.utilde)
        fstar_n, _ = disc.normal_fluxes(proj.utilde)
        res = local_conservation_residual(uh, disc, du, fstar_n)
        totals = conserved_totals(uh, disc)
        if not first:
            first["totals"] = totals
        scale = np.maximum(np.abs(first["totals"]), 1.0)
        rho_min, p_min = min_density_pressure(uh, disc)
        row = {
            "t": state.t,
            "total_entropy": total_entropy(uh, disc),
            "conservation_residual": float(np.abs(res).max()),
            "conserved_drift": float(np.max(np.abs(totals - first["totals"]) / scale)),
            "min_density": rho_min,
            "min_pressure": p_min,
        }
        if track_delta:
            row["delta"] = entropy_residual_delta(uh, disc, du)
        ledger.record(row)
        return row

    observe.ledger = ledger
    return observe


# ----------------------------------------------------------------------------
# errors and rates


def error_rule(elem):
    """Evaluation rule: N+5 point Gauss in 1D, degree 2N+2 on triangles."""
    if elem.kind == INTERVAL:
        return gauss_legendre(elem.N + 5)
    return triangle_quadrature(2 * elem.N + 2)


def l2_error(uh, disc, exact, rule=None, fields=None) -> float:
    """Combined L2 error sqrt(sum over fields of int |u_h - u|^2).

    ``exact(x)`` maps physical points (..., d) to states (..., nvars).
    """
    elem = disc.ops.elem
    rule = rule or error_rule(elem)
    V = basis_eval(elem, rule.points)
    x = disc.mesh.map_points(rule.points)
    diff = V @ uh - np.asarray(exact(x), dtype=float)
    if fields is not None:
        diff = diff[..., fields]
    sq = np.einsum("k,q,kqv->", disc.mesh.J, rule.weights, diff * diff)
    return float(np.sqrt(sq))


def convergence_rate(h, err, last=3) -> float:
    """Least-squares slope of log(err) against log(h) over the ``last`` finest meshes."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    order = np.argsort(h)[:last]
    slope, _ = np.polyfit(np.log(h[order]), np.log(err[order]), 1)
    return float(slope)


@dataclass
class ErrorReport:
    """Rows of (N, quadrature, flux, h, L2_error) plus fitted rates."""

    rows: list = field(default_factory=list)

    columns = ("N", "quadrature", "flux", "h", "L2_error", "rate")

    def add(self, N, quadrature, flux, h, error):
        self.rows.append({"N": N, "quadrature": quadrature, "flux": flux, "h": h,
                          "L2_error": error})

    def series(self, N, quadrature, flux):
        sel = [r for r in self.rows if (r["N"], r["quadrature"], r["flux"]) == (N, quadrature, flux)]
        return np.array([r["h"] for r in sel]), np.array([r["L2_error"] for r in sel])

    def rate(self, N, quadrature, flux, last=3):
        h, e = self.series(N, quadrature, flux)
        if len(h) < 2:
            return float("nan")
        return convergence_rate(h, e, min(last, len(h)))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                rate = self.rate(r["N"], r["quadrature"], r["flux"])
                w.writerow([r["N"], r["quadrature"], r["flux"], repr(float(r["h"])),
                            repr(float(r["L2_error"])), repr(rate)])


def cell_averages(uh, disc) -> np.ndarray:
    w = np.asarray(disc.ops.elem.volume.weights)
    return np.einsum("q,kqv->kv", w, disc.ops.Vq @ uh) / w.sum()


def exact_cell_averages(exact, disc, points=24) -> np.ndarray:
    """Cell averages of a (possibly discontinuous) exact solution."""
    elem = disc.ops.elem
    rule = gauss_legendre(points) if elem.kind == INTERVAL else triangle_quadrature(12)
    x = disc.mesh.map_points(rule.points)
    return np.einsum("q,kqv->kv", rule.weights, np.asarray(exact(x), float)) / rule.weights.sum()


def l1_cell_average_error(uh, disc, exact, field=0) -> float:
    """Sum_k |D^k| |avg_k(u_h) - avg_k(u)| for one field."""
    diff = cell_averages(uh, disc)[:, field] - exact_cell_averages(exact, disc)[:, field]
    vol = disc.mesh.J * disc.ops.elem.measure
    return float(np.sum(vol * np.abs(diff)))


# ----------------------------------------------------------------------------
# exact solutions


def exact_entropy_wave(x, t=0.0, gamma=1.4):
    """rho = 2 + sin(pi (x - t)), u = 1, p = 1 in 1D; x has shape (..., 1)."""
    x = np.asarray(x, dtype=float)[..., 0]
    rho = 2.0 + np.sin(np.pi * (x - t))
    return Euler(1, gamma).from_primitive(rho, np.ones_like(x)[..., None], np.ones_like(x))


def exact_vortex(x, t=0.0, gamma=1.4, beta=5.0, x0=5.0, y0=0.0):
    """Isentropic vortex advected with unit speed in x; x has shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    dx = x[..., 0] - x0 - t
    dy = x[..., 1] - y0
    g = np.exp(1.0 - dx * dx - dy * dy)
    rho = (1.0 - (gamma - 1.0) * beta ** 2 * g * g / (16.0 * gamma * np.pi ** 2)) ** (
        1.0 / (gamma - 1.0))
    a = beta / (2.0 * np.pi) * g
    vel = np.stack([1.0 - a * dy, a * dx], axis=-1)
    return Euler(2, gamma).from_primitive(rho, vel, rho ** gamma)


@dataclass(frozen=True)
class RiemannSolution:
    """Exact solution of a 1D Riemann problem for the ideal-gas Euler equations."""

    left: tuple
    right: tuple
    gamma: float
    p_star: float
    u_star: float

    def sample(self, x, t, x0=0.0):
        """Primitive (rho, u, p) arrays at positions x and time t > 0."""
        g = self.gamma
        xi = (np.asarray(x, dtype=float) - x0) / t
        rho = np.empty_like(xi)
        u = np.empty_like(xi)
        p = np.empty_like(xi)
        ps, us = self.p_star, self.u_star
        for side, sgn in ((self.left, -1.0), (self.right, 1.0)):
            rk, uk, pk = side
            ck = np.sqrt(g * pk / rk)
            mask = (xi < us) if sgn < 0 else (xi >= us)
            xs = xi[mask]
            r = np.empty_like(xs)
            v = np.empty_like(xs)
            q = np.empty_like(xs)
            if ps > pk:
                S = uk + sgn * ck * np.sqrt((g + 1) / (2 * g) * ps / pk + (g - 1) / (2 * g))
                star = ((ps / pk + (g - 1) / (g + 1)) / ((g - 1) / (g + 1) * ps / pk + 1.0)) * rk
                outside = (xs < S) if sgn < 0 else (xs > S)
                r[:] = np.where(outside, rk, star)
                v[:] = np.where(outside, uk, us)
                q[:] = np.where(outside, pk, ps)
            else:
                cs = ck * (ps / pk) ** ((g - 1) / (2 * g))
                head = uk + sgn * ck
                tail = us + sgn * cs
                star = rk * (ps / pk) ** (1.0 / g)
                if sgn < 0:
                    outside, inside = xs < head, xs > tail
                else:
                    outside, inside = xs > head, xs < tail
                # self-similar fan
                vf = 2.0 / (g + 1) * (-sgn * ck + (g - 1) / 2 * uk + xs)
                cf = 2.0 / (g + 1) * (ck - sgn * (g - 1) / 2 * (uk - xs))
                rf = rk * (cf / ck) ** (2.0 / (g - 1))
                pf = pk * (cf / ck) ** (2.0 * g / (g - 1))
                r[:] = np.where(outside, rk, np.where(inside, star, rf))
                v[:] = np.where(outside, uk, np.where(inside, us, vf))
                q[:] = np.where(outside, pk, np.where(inside, ps, pf))
            rho[mask], u[mask], p[mask] = r, v, q
        return rho, u, p

    def shock_speed(self):
        """Speed of the right-facing shock (if any) and the states across it."""
        g = self.gamma
        rk, uk, pk = self.right
        ck = np.sqrt(g * pk / rk)
        S = uk + ck * np.sqrt((g + 1) / (2 * g) * self.p_star / pk + (g - 1) / (2 * g))
        rs = rk * ((self.p_star / pk + (g - 1) / (g + 1))
                   / ((g - 1) / (g + 1) * self.p_star / pk + 1.0))
        return S, (rs, self.u_star, self.p_star), self.right


def solve_riemann(left, right, gamma=1.4, tol=1e-12, maxiter=100) -> RiemannSolution:
    """Newton iteration on the star pressure (two-rarefaction initial guess)."""
    g = gamma

    def fk(p, W):
        rho, u, pk = W
        c = np.sqrt(g * pk / rho)
        if p > pk:
            A = 2.0 / ((g + 1.0) * rho)
            B = (g - 1.0) / (g + 1.0) * pk
            s = np.sqrt(A / (p + B))
            return (p - pk) * s, s * (1.0 - 0.5 * (p - pk) / (p + B))
        r = (p / pk) ** ((g - 1.0) / (2.0 * g))
        return 2.0 * c / (g - 1.0) * (r - 1.0), (p / pk) ** (-(g + 1.0) / (2.0 * g)) / (rho * c)

    rL, uL, pL = left
    rR, uR, pR = right
    cL, cR = np.sqrt(g * pL / rL), np.sqrt(g * pR / rR)
    du = uR - uL
    if 2.0 * (cL + cR) / (g - 1.0) <= du:
        raise OracleFailure("initial data generate a vacuum")
    z = (g - 1.0) / (2.0 * g)
    p = ((cL + cR - 0.5 * (g - 1.0) * du) / (cL / pL ** z + cR / pR ** z)) ** (1.0 / z)
    p = max(p, tol)
    for _ in range(maxiter):
        fL, dL = fk(p, left)
        fR, dR = fk(p, right)
        step = (fL + fR + du) / (dL + dR)
        p_new = max(p - step, 1e-14)
        if abs(p_new - p) <= tol * 0.5 * (p_new + p):
            p = p_new
            fL, _ = fk(p, left)
            fR, _ = fk(p, right)
            return RiemannSolution(tuple(left), tuple(right), g, p, 0.5 * (uL + uR + fR - fL))
        p = p_new
    raise OracleFailure("star-pressure Newton iteration did not converge")


SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)


def sod_exact(x, t, gamma=1.4):
    """Conservative Sod solution at points x (..., 1) and time t > 0."""
    x = np.asarray(x, dtype=float)[..., 0]
    model = Euler(1, gamma)
    if t <= 0:
        rho = np.where(x < 0, SOD_LEFT[0], SOD_RIGHT[0])
        p = np.where(x < 0, SOD_LEFT[2], SOD_RIGHT[2])
        return model.from_primitive(rho, np.zeros_like(x)[..., None], p)
    sol = solve_riemann(SOD_LEFT, SOD_RIGHT, gamma)
    rho, u, p = sol.sample(x.ravel(), t)
    return model.from_primitive(rho.reshape(x.shape), u.reshape(x.shape)[..., None],
                                p.reshape(x.shape))


def rankine_hugoniot_residual(S, behind, ahead, gamma=1.4) -> float:
    """Max relative residual of S [u] = [f(u)] across a discontinuity."""
    model = Euler(1, gamma)
    ub = model.from_primitive(np.array(behind[0]), np.array([behind[1]]), np.array(behind[2]))
    ua = model.from_primitive(np.array(ahead[0]), np.array([ahead[1]]), np.array(ahead[2]))
    fb = model.flux(ub)[0]
    fa = model.flux(ua)[0]
    res = S * (ub - ua) - (fb - fa)
    return float(np.max(np.abs(res) / (1.0 + np.abs(fb) + np.abs(fa))))
