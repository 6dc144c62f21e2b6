import numpy as np
import pytest

from entropy_dg import diagnostics as dg
from entropy_dg.errors import BlowUpError, InvalidArgument
from entropy_dg.mesh import build_mesh_1d, build_tri_mesh
from entropy_dg.physics import Burgers, Euler, LinearAdvection
from entropy_dg.refelem import INTERVAL, TRIANGLE, operators
from entropy_dg.solver import (
    Discretization,
    RunConfig,
    SolverState,
    assemble_rhs,
    burgers_split_form_rhs,
    entropy_project,
    lsrk45_step,
    run,
    volume_rhs,
)

SQUARE = ((-1.0, 1.0), (-1.0, 1.0))


def line_disc(N=3, quad="gauss2", K=6, model=None, flux="ec", periodic=True, **kw):
    ops = operators(INTERVAL, N, quad)
    mesh = build_mesh_1d(K, -1.0, 1.0, periodic, ops.elem)
    model = model or Euler(1)
    ext = None
    if not periodic:
        ext = np.tile(np.array([1.0, 0.2, 2.5])[: model.nvars], (2, 1))
    return Discretization(mesh, ops, model, flux, ext, **kw)


def tri_disc(N=2, K=3, model=None, flux="ec", **kw):
    ops = operators(TRIANGLE, N, "tri2n")
    mesh = build_tri_mesh(K, K, SQUARE, (True, True), ops.elem)
    return Discretization(mesh, ops, model or Euler(2), flux, **kw)


def smooth_euler(x):
    d = x.shape[-1]
    s = np.sin(np.pi * x).sum(axis=-1)
    c = np.cos(np.pi * x).prod(axis=-1)
    rho = 2.0 + 0.5 * s
    vel = np.stack([0.3 + 0.2 * c] + [0.1 * s] * (d - 1), axis=-1)
    p = 1.5 + 0.3 * c
    return Euler(d).from_primitive(rho, vel, p)


# -- entropy projection ---------------------------------------------------------------


@pytest.mark.parametrize("make", [line_disc, tri_disc])
def test_projection_preserves_constants(make):
    disc = make()
    u0 = Euler(disc.model.dim).from_primitive(np.array(1.3), np.full(disc.model.dim, 0.4),
                                              np.array(0.9))
    st = disc.initial_state(lambda x: np.broadcast_to(u0, x.shape[:-1] + u0.shape))
    proj = disc.entropy_project(st.uh)
    assert np.abs(proj.utilde - u0).max() < 1e-13


def test_burgers_projection_is_identity_on_volume():
    disc = line_disc(4, "gauss2", model=Burgers())
    uh = np.random.default_rng(0).standard_normal((6, 5, 1))
    proj = disc.entropy_project(uh)
    assert np.abs(proj.utilde[:, : disc.ops.Nq] - proj.uq).max() < 1e-13


def test_projection_blow_up_names_element():
    disc = line_disc()
    st = disc.initial_state(smooth_euler)
    uh = st.uh.copy()
    uh[4, 0, 0] = -10.0
    with pytest.raises(BlowUpError) as info:
        entropy_project(disc.ops, uh, disc.model, t=0.5)
    assert info.value.element == 4 and info.value.time == 0.5


# -- right-hand side ------------------------------------------------------------------


@pytest.mark.parametrize("flux", ["ec", "eclf"])
@pytest.mark.parametrize("make, quad", [(line_disc, "gll"), (line_disc, "gauss1"),
                                        (line_disc, "gauss2"), (tri_disc, None)])
def test_free_stream(make, quad, flux):
    disc = make(flux=flux) if quad is None else make(quad=quad, flux=flux)
    d = disc.model.dim
    u0 = Euler(d).from_primitive(np.array(1.1), np.linspace(0.3, -0.2, d), np.array(0.7))
    st = disc.initial_state(lambda x: np.broadcast_to(u0, x.shape[:-1] + u0.shape))
    assert np.abs(assemble_rhs(st, disc)).max() < 1e-12


def test_volume_term_vanishes_on_constants():
    ops = operators(TRIANGLE, 3, "tri2n")
    u0 = np.array([1.0, 0.3, -0.1, 2.0])
    ut = np.broadcast_to(u0, (2, ops.Nh, 4)).copy()
    G = np.stack([np.eye(2), np.array([[2.0, 0.5], [0.0, 1.5]])])
    assert np.abs(volume_rhs(ops, G, ut, Euler(2))).max() < 1e-12


def test_compiled_kernel_matches_numpy():
    disc = tri_disc(3, 2)
    ref = Discretization(disc.mesh, disc.ops, disc.model, "ec", compiled=False)
    st = disc.initial_state(smooth_euler)
    assert np.abs(disc.rhs(st.uh) - ref.rhs(st.uh)).max() < 1e-12


def standard_dg_advection(disc, uh, a, lf):
    """Strong-form DG for u_t + a . grad u = 0 with central or upwind-like flux."""
    ops, mesh = disc.ops, disc.mesh
    d = ops.elem.dim
    out = np.zeros_like(uh)
    for k in range(mesh.K):
        for i in range(d):
            for m in range(d):
                out[k] -= a[i] * mesh.G[k, i, m] * (ops.D[m] @ uh[k])
    uf = np.einsum("fp,kpv->kfv", ops.Vf, uh)
    uP = uf.reshape(-1, 1)[mesh.mapP.ravel()].reshape(uf.shape)
    an = np.einsum("kfi,i->kf", mesh.normals, a)[..., None]
    jump = an * (0.5 * (uP + uf)) - an * uf
    if lf:
        jump -= 0.5 * np.abs(an) * (uP - uf)
    out -= np.einsum("pf,kf,kfv->kpv", ops.Lq, mesh.sJ / mesh.J[:, None], jump)
    return out


@pytest.mark.parametrize("flux", ["ec", "eclf"])
@pytest.mark.parametrize("dim", [1, 2])
def test_linear_flux_collapses_to_standard_dg(dim, flux):
    a = np.array([0.7, -0.4])[:dim]
    model = LinearAdvection(a)
    disc = line_disc(4, "gauss2", model=model, flux=flux) if dim == 1 else \
        tri_disc(3, 2, model=model, flux=flux)
    uh = np.random.default_rng(dim).standard_normal((disc.mesh.K, disc.ops.elem.Np, 1))
    got = disc.rhs(uh)
    ref = standard_dg_advection(disc, uh, a, flux == "eclf")
    assert np.abs(got - ref).max() < 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("N", range(1, 6))
@pytest.mark.parametrize("quad", ["gll", "gauss1"])
def test_burgers_matches_split_form(N, quad):
    disc = line_disc(N, quad, K=8, model=Burgers())
    uh = np.random.default_rng(N).standard_normal((8, N + 1, 1))
    a = disc.rhs(uh)
    b = burgers_split_form_rhs(disc, uh)
    assert np.abs(a - b).max() / max(1.0, np.abs(a).max()) < 1e-12


def test_split_form_needs_1d():
    with pytest.raises(InvalidArgument):
        burgers_split_form_rhs(tri_disc(model=Burgers.__new__(Burgers)), np.zeros((1, 1, 1)))


@pytest.mark.parametrize("make, tol", [(line_disc, 1e-12), (tri_disc, 1e-11)])
def test_semidiscrete_entropy_conservation(make, tol):
    disc = make(flux="ec")
    st = disc.initial_state(smooth_euler)
    assert dg.entropy_residual_delta(st.uh, disc) < tol


def test_negative_control_without_projection():
    disc = line_disc(4, "gauss2", K=8, flux="ec", project=False)
    st = disc.initial_state(smooth_euler)
    assert dg.entropy_residual_delta(st.uh, disc) > 1e-6


@pytest.mark.parametrize("make", [line_disc, tri_disc])
def test_lax_friedrichs_dissipates(make):
    disc = make(flux="eclf")
    st = disc.initial_state(smooth_euler)
    proj = disc.entropy_project(st.uh)
    du = disc.rhs(st.uh)
    dU = np.einsum("k,kpv,kpv->", disc.mesh.J, proj.vh, disc.ops.M @ du)
    assert dU < 0


@pytest.mark.parametrize("flux", ["ec", "eclf"])
def test_interface_entropy_production_sign(flux):
    disc = line_disc(3, "gauss2", K=10, flux=flux)
    rng = np.random.default_rng(8)
    st = disc.initial_state(smooth_euler)
    uh = st.uh + 0.05 * rng.standard_normal(st.uh.shape)
    prod = dg.interface_entropy_production(uh, disc).ravel()
    pair = prod + prod[disc.mesh.mapP.ravel()]
    if flux == "ec":
        assert np.abs(pair).max() < 1e-13
    else:
        # partners leave (lam/2)(v+ - v).(u+ - u) >= 0, entropy removed
        assert pair.min() > -1e-14
        assert pair.max() > 0


@pytest.mark.parametrize("flux", ["ec", "eclf"])
@pytest.mark.parametrize("make", [line_disc, tri_disc])
def test_local_conservation(make, flux):
    disc = make(flux=flux)
    st = disc.initial_state(smooth_euler)
    res = dg.local_conservation_residual(st.uh, disc)
    assert np.abs(res).max() < 1e-12
    du = disc.rhs(st.uh)
    assert np.abs(dg.integrate(disc, disc.ops.Vq @ du)).max() < 1e-12


def test_corrupted_interface_flux_detected():
    disc = line_disc(flux="eclf")
    st = disc.initial_state(smooth_euler)
    proj = disc.entropy_project(st.uh)
    fstar_n, _ = disc.normal_fluxes(proj.utilde)
    res = dg.local_conservation_residual(st.uh, disc, fstar_n=fstar_n + 0.5)
    assert np.abs(res).max() > 0.1


def test_nonperiodic_boundary_uses_exterior_state():
    disc = line_disc(2, "gauss2", K=4, flux="eclf", periodic=False)
    u0 = np.array([1.0, 0.2, 2.5])
    st = disc.initial_state(lambda x: np.broadcast_to(u0, x.shape[:-1] + (3,)))
    assert np.abs(disc.rhs(st.uh)).max() < 1e-12


def test_discretization_argument_checks():
    ops = operators(INTERVAL, 2, "gauss2")
    mesh = build_mesh_1d(4, -1, 1, False, ops.elem)
    with pytest.raises(InvalidArgument):
        Discretization(mesh, ops, Euler(1), "eclf")
    with pytest.raises(InvalidArgument):
        Discretization(mesh, ops, Euler(1), "upwind", np.zeros((2, 3)))
    with pytest.raises(InvalidArgument):
        Discretization(mesh, ops, Euler(2), "ec", np.zeros((2, 4)))


def test_threads_bit_identical():
    ops = operators(TRIANGLE, 2, "tri2n")
    mesh = build_tri_mesh(6, 6, SQUARE, (True, True), ops.elem)
    one = Discretization(mesh, ops, Euler(2), "eclf", threads=1, chunk=7)
    many = Discretization(mesh, ops, Euler(2), "eclf", threads=4, chunk=7)
    st = one.initial_state(smooth_euler)
    assert np.array_equal(one.rhs(st.uh), many.rhs(st.uh))


def test_dt_matches_reference_mesh():
    ops = operators(TRIANGLE, 4, "tri2n")
    mesh = build_tri_mesh(8, 8, SQUARE, (True, True), ops.elem)
    disc = Discretization(mesh, ops, Euler(2), "ec")
    assert disc.dt(0.5) == pytest.approx(0.5 * (0.25 / np.sqrt(2)) / 12.5, rel=1e-12)
    assert round(disc.dt(0.5), 5) == 0.00707


# -- time stepping ------------------------------------------------------------------


def test_rk_zero_rhs_is_identity():
    u = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(lsrk45_step(u, 0.0, 0.1, lambda v, t: np.zeros_like(v)), u)


def test_rk_order():
    errs = []
    dts = [0.2, 0.1, 0.05, 0.025]
    for dt in dts:
        u = np.array([1.0])
        for i in range(int(round(1.0 / dt))):
            u = lsrk45_step(u, i * dt, dt, lambda v, t: -v)
        errs.append(abs(u[0] - np.exp(-1.0)))
    order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert order >= 3.9


def test_rk_time_dependent_rhs():
    # u' = cos t, exact sin t: checks the stage times
    u = np.array([0.0])
    dt = 0.05
    for i in range(20):
        u = lsrk45_step(u, i * dt, dt, lambda v, t: np.cos(t) * np.ones_like(v))
    assert abs(u[0] - np.sin(1.0)) < 1e-8


def test_long_linear_advection_run_is_bounded():
    ops = operators(INTERVAL, 3, "gauss2")
    mesh = build_mesh_1d(8, -1, 1, True, ops.elem)
    model = LinearAdvection((1.0,))
    init = lambda x: np.sin(np.pi * x)  # noqa: E731
    cfg = RunConfig(mesh, ops, model, init, T=1e9, cfl=0.125, flux="eclf", cadence=100,
                    max_steps=1000)
    res = run(cfg)
    assert res.steps == 1000 and not res.blew_up
    energy = [r["total_entropy"] for r in res.history]
    assert max(energy) <= energy[0] * (1 + 1e-12)


def test_run_zero_time_echoes_initial_state():
    ops = operators(INTERVAL, 2, "gauss2")
    mesh = build_mesh_1d(4, -1, 1, True, ops.elem)
    cfg = RunConfig(mesh, ops, Euler(1), smooth_euler, T=0.0)
    res = run(cfg)
    disc = res.disc
    assert res.steps == 0 and res.state.t == 0.0
    assert np.array_equal(res.state.uh, disc.initial_state(smooth_euler).uh)
    assert len(res.history) == 1


def test_run_lands_on_final_time():
    ops = operators(INTERVAL, 2, "gauss2")
    mesh = build_mesh_1d(4, -1, 1, True, ops.elem)
    res = run(RunConfig(mesh, ops, Euler(1), smooth_euler, T=0.1234, cfl=0.3))
    assert res.state.t == 0.1234
    assert res.steps == int(np.ceil(0.1234 / res.dt - 1e-12))
    assert res.history[-1]["t"] == 0.1234


def test_run_reports_blow_up():
    ops = operators(INTERVAL, 2, "gauss2")
    mesh = build_mesh_1d(4, -1, 1, True, ops.elem)

    def vacuum(x):
        rho = np.where(x[..., 0] > 0, 1e-9, 1.0)
        return Euler(1).from_primitive(rho, np.full(x.shape, 3.0), np.ones_like(rho))

    res = run(RunConfig(mesh, ops, Euler(1), vacuum, T=1.0, flux="ec"))
    assert res.blew_up and isinstance(res.error, BlowUpError)
    assert res.error.time is not None and res.error.time < 1.0


@pytest.mark.parametrize("kw", [dict(cfl=0.0), dict(cfl=-1.0), dict(T=-1.0), dict(cadence=0)])
def test_run_config_validation(kw):
    ops = operators(INTERVAL, 2, "gauss2")
    mesh = build_mesh_1d(4, -1, 1, True, ops.elem)
    args = dict(T=1.0)
    args.update(kw)
    with pytest.raises(InvalidArgument):
        RunConfig(mesh, ops, Euler(1), smooth_euler, **args)


def test_ec_run_keeps_delta_small():
    ops = operators(INTERVAL, 3, "gauss2")
    mesh = build_mesh_1d(8, -1, 1, True, ops.elem)
    res = run(RunConfig(mesh, ops, Euler(1), smooth_euler, T=0.2, flux="ec", cadence=5,
                        track_delta=True))
    assert max(r["delta"] for r in res.history) < 1e-12
    assert max(r["conserved_drift"] for r in res.history) < 1e-12


def test_solver_state_copy_is_independent():
    st = SolverState(np.zeros((1, 2, 3)), 0.5)
    cp = st.copy()
    cp.uh[0, 0, 0] = 1.0
    assert st.uh[0, 0, 0] == 0.0 and cp.t == 0.5
