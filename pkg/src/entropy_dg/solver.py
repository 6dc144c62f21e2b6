"""Entropy-projected flux-differencing DG semi-discretization and time stepping.

For each element the scheme reads

    J M du/dt + [Vq; Vf]^T sum_i 2 (Q^i o F_i) 1
              + Vf^T Wf sJ (f*_n - f_n(u~_f)) = 0

where ``u~`` are the entropy-projected conservative variables at the
hybrid (volume + surface) points, ``F_i`` holds the two-point fluxes
``f_{i,S}(u~_j, u~_k)`` and ``Q^i = J sum_m G_im Qhat^m`` is the physical
decoupled operator.  The Hadamard sums are evaluated over a precomputed
list of index pairs: every volume-volume pair with j < k and every
volume-surface pair.  The surface-surface block of ``Qhat`` is diagonal so
no surface-surface pairs are needed.  Each pair is evaluated once and used
for both rows by symmetry of the two-point flux.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, InvalidArgument, InvalidState
from .mesh import Mesh
from .physics import Euler, PhysicsModel, lax_friedrichs_penalty
from .refelem import OperatorSet

FLUX_MODES = ("ec", "eclf")

# Carpenter & Kennedy (1994), five-stage fourth-order 2N-storage scheme
RK4A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
RK4B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
RK4C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])

CHUNK = 256


@dataclass
class SolverState:
    """Modal coefficients ``uh`` of shape (K, Np, nvars) at time ``t``."""

    uh: np.ndarray
    t: float = 0.0

    def copy(self):
        return SolverState(self.uh.copy(), self.t)


@dataclass
class EntropyProjection:
    """Intermediate values of the entropy projection, all per element."""

    uq: np.ndarray
    vq: np.ndarray
    vh: np.ndarray
    vtilde: np.ndarray
    utilde: np.ndarray


def _pair_list(ops: OperatorSet):
    Nq, Nh = ops.Nq, ops.Nh
    jv, kv = np.triu_indices(Nq, 1)
    js, ks = np.meshgrid(np.arange(Nq), np.arange(Nq, Nh), indexing="ij")
    return np.concatenate([jv, js.ravel()]), np.concatenate([kv, ks.ravel()])


def _first_bad(mask):
    k, j = np.argwhere(~mask)[0]
    return int(k), int(j)


def entropy_project(ops: OperatorSet, uh, model: PhysicsModel, t=None,
                    project=True) -> EntropyProjection:
    """u_q = Vq uh, v_q = v(u_q), v_h = Pq v_q, v~ = [Vq;Vf] v_h, u~ = u(v~).

    ``uh`` has shape (K, Np, nvars).  Inadmissible values raise
    :class:`BlowUpError` naming the first offending element and point.
    With ``project=False`` u~ is simply [Vq;Vf] uh.
    """
    uh = np.asarray(uh, dtype=float)
    uq = ops.Vq @ uh
    if not project:
        ut = ops.Vh @ uh
        ok = model.admissible(ut) & np.all(np.isfinite(ut), axis=-1)
        if not np.all(ok):
            k, j = _first_bad(ok)
            raise BlowUpError(f"inadmissible trace at element {k}, point {j}", time=t,
                              element=k, point=j, values=ut[k, j])
        return EntropyProjection(uq, uq, uh, ut, ut)
    ok = model.admissible(uq) & np.all(np.isfinite(uq), axis=-1)
    if not np.all(ok):
        k, j = _first_bad(ok)
        raise BlowUpError(f"inadmissible state at element {k}, volume point {j}", time=t,
                          element=k, point=j, values=uq[k, j])
    vq = model.entropy_vars(uq)
    vh = ops.Pq @ vq
    vt = ops.Vh @ vh
    with np.errstate(all="ignore"):
        ut = model.cons_vars(vt, check=False)
        ok = model.admissible(ut) & np.all(np.isfinite(ut), axis=-1)
    if not np.all(ok):
        k, j = _first_bad(ok)
        raise BlowUpError(f"entropy projection left the admissible set at element {k}, "
                          f"hybrid point {j}", time=t, element=k, point=j, values=vt[k, j])
    return EntropyProjection(uq, vq, vh, vt, ut)


class VolumeKernel:
    """Pair-list evaluation of -M^-1 [Vq;Vf]^T sum_m 2 (Qhat^m o Fhat^m) 1.

    The scatter matrices are premultiplied by the lift so each element costs
    one flux evaluation per pair plus two small matrix products.
    """

    def __init__(self, ops: OperatorSet, model: PhysicsModel, compiled=True):
        self.model = model
        self.compiled = compiled and isinstance(model, Euler)
        d, Nh = ops.elem.dim, ops.Nh
        self.pj, self.pk = _pair_list(ops)
        P = len(self.pj)
        cols = np.arange(P)
        lift = -ops.Minv @ ops.Vh.T
        # row j of the Hadamard sum gets 2 Q_jk f(j,k); row k gets 2 Q_kj f(j,k).
        # Columns are ordered (pair, direction) to match ec_flux_dirs output.
        E = np.zeros((Nh, P * d))
        Rdiag = np.zeros((lift.shape[0], Nh * d))
        for m in range(d):
            Q = ops.QN[m]
            E[self.pj, cols * d + m] = 2.0 * Q[self.pj, self.pk]
            E[self.pk, cols * d + m] += 2.0 * Q[self.pk, self.pj]
            Rdiag[:, np.arange(Nh) * d + m] = lift * (2.0 * np.diag(Q))[None, :]
        self.R = lift @ E
        self.Rdiag = Rdiag
        self.lift = np.ascontiguousarray(lift)
        self.qjk = np.array([2.0 * ops.QN[m][self.pj, self.pk] for m in range(d)])
        self.qkj = np.array([2.0 * ops.QN[m][self.pk, self.pj] for m in range(d)])
        self.qdiag = np.array([2.0 * np.diag(ops.QN[m]) for m in range(d)])

    def __call__(self, ut, G):
        model = self.model
        if self.compiled:
            from .kernels import euler_volume
            dirs = np.ascontiguousarray(np.swapaxes(G, 1, 2))
            return euler_volume(np.ascontiguousarray(ut), dirs, self.pj, self.pk, self.qjk,
                                self.qkj, self.qdiag, self.lift, model.gamma, model.log_eps)
        K, Nh, nv = ut.shape
        # direction m of the contravariant flux is column m of G
        dirs = np.swapaxes(G, 1, 2)[:, None]
        aux = model.flux_aux(ut)
        Fh = model.ec_flux_dirs(model.take_aux(aux, self.pj), model.take_aux(aux, self.pk), dirs)
        out = self.R @ Fh.reshape(K, -1, nv)
        fd = model.flux_dirs(ut, dirs)
        out += self.Rdiag @ fd.reshape(K, -1, nv)
        return out


class Discretization:
    """Precomputed operators and connectivity for one (mesh, ops, model).

    ``flux`` is ``"ec"`` (entropy conservative) or ``"eclf"`` (entropy
    conservative plus local Lax-Friedrichs).  ``exterior`` holds exterior
    states for boundary-flagged surface points, shape (n_boundary, nvars),
    ordered as ``np.argwhere(mesh.boundary)``.  With ``project=False`` the
    two-point fluxes see raw polynomial values instead of the entropy
    projected ones (a negative control that breaks entropy conservation).
    Elements are processed in fixed-size chunks; ``threads > 1`` only
    changes how chunks are scheduled, so results are bit-identical.
    """

    def __init__(self, mesh: Mesh, ops: OperatorSet, model: PhysicsModel, flux="eclf",
                 exterior=None, project=True, threads=1, chunk=CHUNK, compiled=True):
        if flux not in FLUX_MODES:
            raise InvalidArgument(f"flux mode must be one of {FLUX_MODES}, got {flux!r}")
        if ops.elem.kind != mesh.elem.kind or ops.Nf != mesh.elem.Nf or not np.allclose(
                ops.elem.surface_points, mesh.elem.surface_points):
            raise InvalidArgument("mesh and operator set use different surface points")
        if model.dim != ops.elem.dim:
            raise InvalidArgument("model dimension does not match the element")
        self.mesh, self.ops, self.model = mesh, ops, model
        self.flux = flux
        self.project = project
        self.threads = max(1, int(threads))
        self.chunk = int(chunk)
        self.kernel = VolumeKernel(ops, model, compiled)
        self.bidx = np.argwhere(mesh.boundary)
        nb = len(self.bidx)
        if nb and exterior is None:
            raise InvalidArgument("mesh has boundary points but no exterior states were given")
        self.exterior = None if exterior is None else np.asarray(exterior, dtype=float).reshape(
            nb, model.nvars)
        self.lift_f = ops.Lq[None, :, :] * (mesh.sJ / mesh.J[:, None])[:, None, :]

    def entropy_project(self, uh, t=None) -> EntropyProjection:
        return entropy_project(self.ops, uh, self.model, t, self.project)

    def _chunked(self, fn, K, *arrays):
        spans = [(s, min(s + self.chunk, K)) for s in range(0, K, self.chunk)]
        pieces = [None] * len(spans)

        def work(i):
            a, b = spans[i]
            pieces[i] = fn(*(x[a:b] for x in arrays))

        if self.threads == 1 or len(spans) == 1:
            for i in range(len(spans)):
                work(i)
        else:
            with ThreadPoolExecutor(self.threads) as pool:
                list(pool.map(work, range(len(spans))))
        return np.concatenate(pieces, axis=0)

    def volume_rhs(self, utilde):
        return self._chunked(self.kernel, len(utilde), utilde, self.mesh.G)

    def exterior_traces(self, utilde):
        Nq = self.ops.Nq
        uf = utilde[:, Nq:]
        nv = uf.shape[-1]
        uP = uf.reshape(-1, nv)[self.mesh.mapP.ravel()].reshape(uf.shape)
        if len(self.bidx):
            uP[self.bidx[:, 0], self.bidx[:, 1]] = self.exterior
        return uf, uP

    def normal_fluxes(self, utilde):
        """Numerical normal flux f*_n and trace flux f_n(u~_f), each (K, Nf, nvars)."""
        model = self.model
        n = self.mesh.normals
        uf, uP = self.exterior_traces(utilde)
        fstar = model.ec_flux(uP, uf)
        fstar_n = np.einsum("kfi,kfiv->kfv", n, fstar)
        f_n = np.einsum("kfi,kfiv->kfv", n, model.flux(uf))
        if self.flux == "eclf":
            lam = model.max_wavespeed(uf, uP, n if model.dim > 1 else None)
            fstar_n = fstar_n + lax_friedrichs_penalty(uf, uP, lam)
        return fstar_n, f_n

    def interface_rhs(self, utilde):
        """-(1/J) Lq sJ (f*_n - f_n(u~_f)) for every element."""
        fstar_n, f_n = self.normal_fluxes(utilde)
        return -(self.lift_f @ (fstar_n - f_n))

    def rhs(self, uh, t=None):
        proj = self.entropy_project(uh, t)
        return self.volume_rhs(proj.utilde) + self.interface_rhs(proj.utilde)

    def dt(self, cfl):
        N = self.ops.elem.N
        return cfl * self.mesh.h / ((N + 1) ** 2 / 2.0)

    def initial_state(self, fn) -> SolverState:
        """L2 projection of ``fn(x)`` (x: (..., d) -> (..., nvars)) onto the basis."""
        xq = self.mesh.map_points(self.ops.elem.volume.points)
        return SolverState(self.ops.Pq @ np.asarray(fn(xq), dtype=float), 0.0)


def volume_rhs(ops: OperatorSet, G, utilde, model: PhysicsModel, compiled=True):
    """Volume contribution for elements with geometric factors G (K, d, d)."""
    return VolumeKernel(ops, model, compiled)(np.asarray(utilde, float), np.asarray(G, float))


def interface_rhs(disc: "Discretization", utilde):
    return disc.interface_rhs(utilde)


def assemble_rhs(state: SolverState, disc: Discretization):
    return disc.rhs(state.uh, state.t)


def burgers_split_form_rhs(disc: "Discretization", uh):
    """Reference Burgers RHS in split form for 1D meshes.

    J du/dt = -1/3 (D Pq uq^2 + Pq diag(uq) Dq uq)
              - Lq n (1/6 (u+ uf + u+^2) - 1/3 Vf Pq uq^2)

    with uq = Vq uh, uf = Vf uh and u+ the exterior trace.  This is what the
    flux-differencing scheme with the Burgers two-point flux reduces to, and
    serves as an independent check of it.
    """
    ops, mesh = disc.ops, disc.mesh
    if ops.elem.dim != 1:
        raise InvalidArgument("split-form reference is one-dimensional")
    uh = np.asarray(uh, dtype=float)[..., 0]
    D = ops.D[0]
    Dq = ops.Dq[0]
    uq = uh @ ops.Vq.T
    uf = uh @ ops.Vf.T
    uP = uf.ravel()[mesh.mapP.ravel()].reshape(uf.shape)
    if len(disc.bidx):
        uP[disc.bidx[:, 0], disc.bidx[:, 1]] = disc.exterior[:, 0]
    n = mesh.normals[..., 0]
    Pu2 = (uq ** 2) @ ops.Pq.T
    vol = (Pu2 @ D.T + (uq * (uq @ Dq.T)) @ ops.Pq.T) / 3.0
    surf = n * ((uP * uf + uP ** 2) / 6.0 - (Pu2 @ ops.Vf.T) / 3.0)
    return (-(vol + surf @ ops.Lq.T) / mesh.J[:, None])[..., None]


def lsrk45_step(u, t, dt, rhs):
    """One Carpenter-Kennedy LSRK(5,4) step of u' = rhs(u, t); returns new u."""
    u = np.array(u, dtype=float, copy=True)
    res = np.zeros_like(u)
    for s in range(5):
        k = rhs(u, t + RK4C[s] * dt)
        res = RK4A[s] * res + dt * k
        u = u + RK4B[s] * res
    return u


# -- driver -------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything needed to advance one problem from t = 0 to T."""

    mesh: Mesh
    ops: OperatorSet
    model: PhysicsModel
    initial: object
    T: float
    cfl: float = 0.125
    flux: str = "eclf"
    cadence: int = 1
    exterior: object = None
    project: bool = True
    threads: int = 1
    track_delta: bool = False
    max_steps: int | None = None

    def __post_init__(self):
        if not self.cfl > 0:
            raise InvalidArgument(f"CFL must be positive, got {self.cfl}")
        if not self.T >= 0:
            raise InvalidArgument(f"final time must be non-negative, got {self.T}")
        if self.cadence < 1:
            raise InvalidArgument("diagnostic cadence must be >= 1")


@dataclass
class RunResult:
    state: SolverState
    disc: Discretization
    history: list = field(default_factory=list)
    steps: int = 0
    dt: float = 0.0
    blew_up: bool = False
    error: Exception | None = None


def make_discretization(cfg: RunConfig) -> Discretization:
    ext = None
    if cfg.mesh.boundary.any():
        if cfg.exterior is None:
            fn = cfg.initial
        else:
            fn = cfg.exterior
        if callable(fn):
            xb = cfg.mesh.xf[cfg.mesh.boundary]
            ext = np.asarray(fn(xb), dtype=float)
        else:
            ext = fn
    return Discretization(cfg.mesh, cfg.ops, cfg.model, cfg.flux, ext, cfg.project,
                          cfg.threads)


def run(cfg: RunConfig, observer=None) -> RunResult:
    """Advance with dt = CFL h / C_N, C_N = (N+1)^2/2, truncating the last step.

    ``observer(state, disc)`` returns a dict of diagnostics; it is called at
    t = 0, every ``cadence`` steps and at the final time.  A blow-up stops
    the run and is reported through ``RunResult.blew_up`` and ``error``.
    """
    from .diagnostics import standard_observer

    disc = make_discretization(cfg)
    observer = observer or standard_observer(track_delta=cfg.track_delta)
    state = disc.initial_state(cfg.initial)
    dt = disc.dt(cfg.cfl)
    result = RunResult(state, disc, dt=dt)

    def rhs(u, t):
        return disc.rhs(u, t)

    try:
        result.history.append(observer(state, disc))
        step = 0
        while state.t < cfg.T and (cfg.max_steps is None or step < cfg.max_steps):
            last = cfg.T - state.t <= dt * (1.0 + 1e-12)
            h = cfg.T - state.t if last else dt
            uh = lsrk45_step(state.uh, state.t, h, rhs)
            if not np.all(np.isfinite(uh)):
                raise BlowUpError("non-finite coefficients", time=state.t + h)
            state = SolverState(uh, cfg.T if last else state.t + h)
            step += 1
            result.steps = step
            result.state = state
            if step % cfg.cadence == 0 or last:
                result.history.append(observer(state, disc))
    except InvalidState as exc:
        result.blew_up = True
        if isinstance(exc, BlowUpError) and exc.time is None:
            exc.time = state.t
        result.error = exc
    result.state = state
    return result
