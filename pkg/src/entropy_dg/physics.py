"""Conservation-law models: Burgers, linear advection and compressible Euler.

States are numpy arrays whose *last* axis holds the conserved variables.
Directional quantities (physical fluxes, two-point fluxes) carry an extra
axis of length ``dim`` just before the variable axis, so ``flux(u)`` has
shape ``u.shape[:-1] + (dim, nvars)``.

Every model exposes the same contract used by the solver and the
diagnostics: physical flux, convex entropy ``U``, entropy variables
``v = U'(u)`` and their inverse, entropy potentials ``psi_i``, entropy
fluxes ``F_i``, a symmetric entropy-conservative two-point flux and a
wavespeed estimate for Lax-Friedrichs penalization.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidState

DEFAULT_LOG_EPS = 1e-4


def log_mean(a, b, eps=DEFAULT_LOG_EPS, log_a=None, log_b=None, check=True):
    """Logarithmic mean (a - b) / (ln a - ln b) of positive numbers.

    Near a == b the quotient loses accuracy, so when
    ``f**2 < eps`` with ``f = (a - b) / (a + b)`` the four-term even series
    of Ismail and Roe is used instead::

        (a + b) / 2 / (1 + f^2/3 + f^4/5 + f^6/7)

    Precomputed logarithms may be passed to avoid recomputing them when the
    same values appear in many pairs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if check and (np.any(a <= 0) or np.any(b <= 0)):
        raise InvalidState("logarithmic mean needs positive arguments")
    if log_a is None:
        log_a = np.log(a)
    if log_b is None:
        log_b = np.log(b)
    s = a + b
    d = a - b
    f = d / s
    u = f * f
    small = u < eps
    dl = log_a - log_b
    direct = d / np.where(small, 1.0, dl)
    series = 0.5 * s / (1.0 + u * (1.0 / 3.0 + u * (0.2 + u / 7.0)))
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def _dot(a, b):
    """Contraction over a short trailing axis (faster than np.sum for 1-3 terms)."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = a[..., 0] * b[..., 0]
    for i in range(1, max(a.shape[-1], b.shape[-1])):
        out = out + a[..., min(i, a.shape[-1] - 1)] * b[..., min(i, b.shape[-1] - 1)]
    return out


class PhysicsModel:
    """Interface shared by all conservation laws."""

    name = "model"
    nvars = 1
    dim = 1

    def flux(self, u):
        raise NotImplementedError

    def entropy(self, u):
        raise NotImplementedError

    def entropy_vars(self, u):
        raise NotImplementedError

    def cons_vars(self, v, check=True):
        raise NotImplementedError

    def potential(self, u):
        """Entropy potentials psi_i = v . f_i - F_i, shape (..., dim)."""
        raise NotImplementedError

    def entropy_flux(self, u):
        raise NotImplementedError

    def admissible(self, u):
        return np.ones(np.shape(u)[:-1], dtype=bool)

    # two-point fluxes operate on a per-point auxiliary tuple so that
    # expensive per-point work (logs, velocities) is done once per point
    def flux_aux(self, u):
        return (u,)

    def take_aux(self, aux, index, axis=1):
        return tuple(np.take(a, index, axis=axis) for a in aux)

    def ec_flux_aux(self, auxL, auxR):
        raise NotImplementedError

    def ec_flux(self, uL, uR):
        """Entropy-conservative two-point flux, shape (..., dim, nvars)."""
        return self.ec_flux_aux(self.flux_aux(np.asarray(uL, float)),
                                self.flux_aux(np.asarray(uR, float)))

    def ec_flux_dirs(self, auxL, auxR, dirs):
        """Two-point flux along direction vectors: sum_i dirs[..., m, i] f_{i,S}.

        ``dirs`` broadcasts against (..., ndir, dim); result (..., ndir, nvars).
        """
        return np.einsum("...mi,...iv->...mv", dirs, self.ec_flux_aux(auxL, auxR))

    def flux_dirs(self, u, dirs):
        return np.einsum("...mi,...iv->...mv", dirs, self.flux(u))

    def max_wavespeed(self, uL, uR, normal=None):
        raise NotImplementedError

    def random_states(self, rng, n):
        raise NotImplementedError


class Burgers(PhysicsModel):
    """Inviscid Burgers equation u_t + (u^2/2)_x = 0 with U = u^2/2."""

    name = "burgers"
    nvars = 1
    dim = 1

    def flux(self, u):
        return (0.5 * u * u)[..., None, :]

    def entropy(self, u):
        return 0.5 * u[..., 0] ** 2

    def entropy_vars(self, u):
        return np.array(u, dtype=float, copy=True)

    def cons_vars(self, v, check=True):
        return np.array(v, dtype=float, copy=True)

    def potential(self, u):
        return (u[..., 0] ** 3 / 6.0)[..., None]

    def entropy_flux(self, u):
        return (u[..., 0] ** 3 / 3.0)[..., None]

    def ec_flux_aux(self, auxL, auxR):
        uL, uR = auxL[0], auxR[0]
        return ((uL * uL + uL * uR + uR * uR) / 6.0)[..., None, :]

    def max_wavespeed(self, uL, uR, normal=None):
        return np.maximum(np.abs(uL[..., 0]), np.abs(uR[..., 0]))

    def random_states(self, rng, n):
        return rng.uniform(-5.0, 5.0, size=(n, 1))


def burgers_flux(uL, uR):
    """(uL^2 + uL uR + uR^2) / 6."""
    return (uL * uL + uL * uR + uR * uR) / 6.0


class LinearAdvection(PhysicsModel):
    """u_t + a . grad u = 0 with the central two-point flux."""

    name = "advection"
    nvars = 1

    def __init__(self, velocity=(1.0,)):
        self.velocity = np.asarray(velocity, dtype=float)
        self.dim = len(self.velocity)

    def flux(self, u):
        return self.velocity[:, None] * u[..., None, :]

    def entropy(self, u):
        return 0.5 * u[..., 0] ** 2

    def entropy_vars(self, u):
        return np.array(u, dtype=float, copy=True)

    def cons_vars(self, v, check=True):
        return np.array(v, dtype=float, copy=True)

    def potential(self, u):
        return 0.5 * self.velocity * u[..., 0:1] ** 2

    def entropy_flux(self, u):
        return self.velocity * u[..., 0:1] ** 2

    def ec_flux_aux(self, auxL, auxR):
        return self.velocity[:, None] * (0.5 * (auxL[0] + auxR[0]))[..., None, :]

    def max_wavespeed(self, uL, uR, normal=None):
        if normal is None:
            speed = np.abs(self.velocity).max()
        else:
            speed = np.abs(np.asarray(normal) @ self.velocity)
        return np.broadcast_to(speed, np.shape(uL)[:-1]).astype(float)

    def random_states(self, rng, n):
        return rng.uniform(-2.0, 2.0, size=(n, 1))


class Euler(PhysicsModel):
    """Compressible Euler equations for an ideal gas in 1D or 2D.

    Conserved variables are (rho, rho u[, rho v], E).  The entropy is
    U = -rho s with s = ln(p / rho^gamma); the matching entropy variables are

        v = ((rho e (gamma + 1 - s) - E) / rho e,  rho u / rho e,  ...,  -rho / rho e)

    with rho e = E - rho |u|^2 / 2, and the entropy potential is
    psi_i = (gamma - 1) rho u_i.
    """

    name = "euler"

    def __init__(self, dim=1, gamma=1.4, log_eps=DEFAULT_LOG_EPS):
        if dim not in (1, 2):
            raise ValueError("Euler model supports dim 1 or 2")
        self.dim = dim
        self.nvars = dim + 2
        self.gamma = float(gamma)
        self.log_eps = float(log_eps)

    # -- primitive helpers --------------------------------------------------

    def _split(self, u):
        rho = u[..., 0]
        mom = u[..., 1:1 + self.dim]
        E = u[..., -1]
        return rho, mom, E

    def internal_energy(self, u):
        rho, mom, E = self._split(u)
        return E - 0.5 * _dot(mom, mom) / rho

    def pressure(self, u):
        return (self.gamma - 1.0) * self.internal_energy(u)

    def physical_entropy(self, u):
        rho = u[..., 0]
        return np.log(self.pressure(u)) - self.gamma * np.log(rho)

    def admissible(self, u):
        rho = u[..., 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            rhoe = self.internal_energy(u)
        return (rho > 0) & (rhoe > 0) & np.isfinite(rhoe)

    def _require(self, u):
        if not np.all(self.admissible(u)):
            raise InvalidState("inadmissible Euler state (rho <= 0 or rho e <= 0)")

    def from_primitive(self, rho, vel, p):
        """Conserved state from density, velocity (..., dim) and pressure."""
        rho = np.asarray(rho, dtype=float)
        vel = np.asarray(vel, dtype=float)
        if self.dim == 1 and vel.shape[-1:] != (1,):
            vel = vel[..., None]
        p = np.asarray(p, dtype=float)
        u = np.empty(np.broadcast_shapes(rho.shape, p.shape, vel.shape[:-1]) + (self.nvars,))
        u[..., 0] = rho
        u[..., 1:1 + self.dim] = rho[..., None] * vel
        u[..., -1] = p / (self.gamma - 1.0) + 0.5 * rho * _dot(vel, vel)
        return u

    def primitive(self, u):
        rho, mom, _ = self._split(u)
        return rho, mom / rho[..., None], self.pressure(u)

    # -- contract -----------------------------------------------------------

    def flux(self, u):
        rho, mom, E = self._split(u)
        vel = mom / rho[..., None]
        p = self.pressure(u)
        out = np.empty(u.shape[:-1] + (self.dim, self.nvars))
        for i in range(self.dim):
            out[..., i, 0] = mom[..., i]
            out[..., i, 1:1 + self.dim] = mom[..., i, None] * vel
            out[..., i, 1 + i] += p
            out[..., i, -1] = vel[..., i] * (E + p)
        return out

    def entropy(self, u):
        return -u[..., 0] * self.physical_entropy(u)

    def entropy_vars(self, u):
        self._require(u)
        g = self.gamma
        rho, mom, E = self._split(u)
        rhoe = self.internal_energy(u)
        s = np.log((g - 1.0) * rhoe) - g * np.log(rho)
        v = np.empty_like(u, dtype=float)
        v[..., 0] = (rhoe * (g + 1.0 - s) - E) / rhoe
        v[..., 1:1 + self.dim] = mom / rhoe[..., None]
        v[..., -1] = -rho / rhoe
        return v

    def cons_vars(self, v, check=True):
        """Inverse entropy map.  With ``check=False`` inadmissible input
        yields NaN/inf/negative entries instead of raising."""
        g = self.gamma
        v = np.asarray(v, dtype=float)
        vlast = v[..., -1]
        if check and np.any(~(vlast < 0)):
            raise InvalidState("entropy variables outside the admissible cone (last component >= 0)")
        vm = v[..., 1:1 + self.dim]
        vm2 = _dot(vm, vm)
        s = g - v[..., 0] + vm2 / (2.0 * vlast)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            rhoe = ((g - 1.0) / (-vlast) ** g) ** (1.0 / (g - 1.0)) * np.exp(-s / (g - 1.0))
        if check and not np.all(np.isfinite(rhoe) & (rhoe > 0)):
            raise InvalidState("entropy variables map to a non-positive or infinite internal energy")
        u = np.empty_like(v)
        u[..., 0] = -rhoe * vlast
        u[..., 1:1 + self.dim] = rhoe[..., None] * vm
        u[..., -1] = rhoe * (1.0 - vm2 / (2.0 * vlast))
        return u

    def potential(self, u):
        return (self.gamma - 1.0) * u[..., 1:1 + self.dim]

    def entropy_flux(self, u):
        rho, mom, _ = self._split(u)
        return (self.entropy(u) / rho)[..., None] * mom

    def flux_aux(self, u):
        rho, mom, _ = self._split(u)
        vel = mom / rho[..., None]
        p = self.pressure(u)
        beta = rho / (2.0 * p)
        return (rho, vel, beta, np.log(rho), np.log(beta))

    def ec_flux_aux(self, auxL, auxR):
        """Chandrashekar's kinetic-energy-preserving EC flux."""
        rhoL, velL, betaL, lrhoL, lbetaL = auxL
        rhoR, velR, betaR, lrhoR, lbetaR = auxR
        g = self.gamma
        eps = self.log_eps
        rho_log = log_mean(rhoL, rhoR, eps, lrhoL, lrhoR, check=False)
        beta_log = log_mean(betaL, betaR, eps, lbetaL, lbetaR, check=False)
        rho_avg = 0.5 * (rhoL + rhoR)
        beta_avg = 0.5 * (betaL + betaR)
        vel_avg = 0.5 * (velL + velR)
        v2_avg = 0.5 * (_dot(velL, velL) + _dot(velR, velR))
        p_avg = rho_avg / (2.0 * beta_avg)
        # enthalpy-like factor shared by every direction
        h = 1.0 / (2.0 * (g - 1.0) * beta_log) - 0.5 * v2_avg
        d = self.dim
        out = np.empty(rho_log.shape + (d, self.nvars))
        for i in range(d):
            f1 = rho_log * vel_avg[..., i]
            out[..., i, 0] = f1
            out[..., i, 1:1 + d] = f1[..., None] * vel_avg
            out[..., i, 1 + i] += p_avg
            out[..., i, -1] = f1 * h + _dot(vel_avg, out[..., i, 1:1 + d])
        return out

    def ec_flux_dirs(self, auxL, auxR, dirs):
        rhoL, velL, betaL, lrhoL, lbetaL = auxL
        rhoR, velR, betaR, lrhoR, lbetaR = auxR
        g = self.gamma
        eps = self.log_eps
        rho_log = log_mean(rhoL, rhoR, eps, lrhoL, lrhoR, check=False)
        beta_log = log_mean(betaL, betaR, eps, lbetaL, lbetaR, check=False)
        p_avg = (rhoL + rhoR) / (2.0 * (betaL + betaR))
        vel_avg = 0.5 * (velL + velR)
        v2_avg = 0.5 * (_dot(velL, velL) + _dot(velR, velR))
        vbar2 = _dot(vel_avg, vel_avg)
        h = 1.0 / (2.0 * (g - 1.0) * beta_log) - 0.5 * v2_avg + vbar2
        un = _dot(vel_avg[..., None, :], dirs)
        f1 = rho_log[..., None] * un
        d = self.dim
        out = np.empty(f1.shape + (self.nvars,))
        out[..., 0] = f1
        out[..., 1:1 + d] = f1[..., None] * vel_avg[..., None, :] + p_avg[..., None, None] * dirs
        out[..., -1] = f1 * h[..., None] + p_avg[..., None] * un
        return out

    def flux_dirs(self, u, dirs):
        rho, mom, E = self._split(u)
        vel = mom / rho[..., None]
        p = self.pressure(u)
        un = _dot(vel[..., None, :], dirs)
        out = np.empty(un.shape + (self.nvars,))
        out[..., 0] = rho[..., None] * un
        out[..., 1:1 + self.dim] = out[..., 0:1] * vel[..., None, :] + p[..., None, None] * dirs
        out[..., -1] = un * (E + p)[..., None]
        return out

    def sound_speed(self, u):
        return np.sqrt(self.gamma * self.pressure(u) / u[..., 0])

    def max_wavespeed(self, uL, uR, normal=None):
        """max(|u.n| + c) over both states; |u| + c in 1D or without a normal."""
        def speed(u):
            vel = u[..., 1:1 + self.dim] / u[..., 0:1]
            if normal is None:
                un = np.sqrt(_dot(vel, vel))
            else:
                un = np.abs(_dot(vel, normal))
            return un + self.sound_speed(u)
        uL = np.asarray(uL, float)
        uR = np.asarray(uR, float)
        self._require(uL)
        self._require(uR)
        return np.maximum(speed(uL), speed(uR))

    def random_states(self, rng, n):
        rho = rng.uniform(0.1, 10.0, n)
        p = rng.uniform(0.1, 10.0, n)
        if self.dim == 1:
            vel = rng.uniform(-3.0, 3.0, (n, 1))
        else:
            r = 3.0 * np.sqrt(rng.uniform(0.0, 1.0, n))
            th = rng.uniform(0.0, 2 * np.pi, n)
            vel = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        return self.from_primitive(rho, vel, p)


# ----------------------------------------------------------------------------
# functional front ends


def euler_entropy_vars(u, dim=None, gamma=1.4):
    u = np.asarray(u, dtype=float)
    return Euler(dim or u.shape[-1] - 2, gamma).entropy_vars(u)


def euler_from_entropy_vars(v, dim=None, gamma=1.4):
    v = np.asarray(v, dtype=float)
    return Euler(dim or v.shape[-1] - 2, gamma).cons_vars(v)


def euler_ec_flux_1d(uL, uR, gamma=1.4, log_eps=DEFAULT_LOG_EPS):
    model = Euler(1, gamma, log_eps)
    uL = np.asarray(uL, float)
    uR = np.asarray(uR, float)
    model._require(uL)
    model._require(uR)
    return model.ec_flux(uL, uR)[..., 0, :]


def euler_ec_flux_2d(uL, uR, gamma=1.4, log_eps=DEFAULT_LOG_EPS):
    """Returns (f_x, f_y), each of shape (..., 4)."""
    model = Euler(2, gamma, log_eps)
    uL = np.asarray(uL, float)
    uR = np.asarray(uR, float)
    model._require(uL)
    model._require(uR)
    f = model.ec_flux(uL, uR)
    return f[..., 0, :], f[..., 1, :]


def euler_max_wavespeed(uL, uR, normal=None, gamma=1.4):
    uL = np.asarray(uL, float)
    return Euler(uL.shape[-1] - 2, gamma).max_wavespeed(uL, uR, normal)


def lax_friedrichs_penalty(u_in, u_out, lam):
    """Interface dissipation -(lam/2) (u_out - u_in) added to the normal flux.

    ``u_in``/``u_out`` are the entropy-projected traces on the interior and
    exterior side of a face.
    """
    lam = np.asarray(lam, dtype=float)
    return -0.5 * lam[..., None] * (np.asarray(u_out) - np.asarray(u_in))


def tadmor_check(model: PhysicsModel, trials=1000, seed=0, potential=None) -> float:
    """Max relative violation of (vL - vR) . f_S = psi_L - psi_R.

    The residual in direction i is normalized by 1 + |psi_L| + |psi_R| and
    the maximum is taken over random admissible pairs and all directions.
    ``potential`` overrides ``model.potential`` (negative controls).
    """
    rng = np.random.default_rng(seed)
    uL = model.random_states(rng, trials)
    uR = model.random_states(rng, trials)
    psi = potential or model.potential
    vL, vR = model.entropy_vars(uL), model.entropy_vars(uR)
    fS = model.ec_flux(uL, uR)
    lhs = np.einsum("nv,ndv->nd", vL - vR, fS)
    pL, pR = psi(uL), psi(uR)
    res = np.abs(lhs - (pL - pR)) / (1.0 + np.abs(pL) + np.abs(pR))
    return float(res.max())
