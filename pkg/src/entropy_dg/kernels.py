"""Compiled Euler volume kernel.

Same arithmetic as :class:`solver.VolumeKernel` with the Euler
entropy-conservative flux, fused into one loop per element so that no
per-pair temporaries are allocated.  Only summation order differs from the
numpy path.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _log_mean(a, b, la, lb, eps):
    s = a + b
    d = a - b
    f = d / s
    u = f * f
    if u < eps:
        return 0.5 * s / (1.0 + u * (1.0 / 3.0 + u * (0.2 + u / 7.0)))
    return d / (la - lb)


@njit(cache=True)
def euler_volume(ut, dirs, pj, pk, qjk, qkj, qdiag, lift, gamma, eps):
    """Volume term for every element.

    ut     (K, Nh, nv) entropy-projected states
    dirs   (K, d, d)   dirs[k, m, i]: component i of contravariant direction m
    qjk    (d, P)      2 Q^m[j, k] for pair p = (j, k); qkj likewise
    qdiag  (d, Nh)     2 Q^m[j, j]
    lift   (Np, Nh)    -M^-1 [Vq; Vf]^T
    """
    K, Nh, nv = ut.shape
    d = nv - 2
    P = pj.shape[0]
    Np = lift.shape[0]
    out = np.empty((K, Np, nv))
    rho = np.empty(Nh)
    vel = np.empty((Nh, d))
    beta = np.empty(Nh)
    lrho = np.empty(Nh)
    lbeta = np.empty(Nh)
    pres = np.empty(Nh)
    v2 = np.empty(Nh)
    r = np.empty((Nh, nv))
    f = np.empty(nv)
    vavg = np.empty(d)
    gm1 = gamma - 1.0
    for k in range(K):
        for j in range(Nh):
            rj = ut[k, j, 0]
            rho[j] = rj
            s = 0.0
            for i in range(d):
                vel[j, i] = ut[k, j, 1 + i] / rj
                s += ut[k, j, 1 + i] * vel[j, i]
            v2[j] = 0.0
            for i in range(d):
                v2[j] += vel[j, i] * vel[j, i]
            pj_ = gm1 * (ut[k, j, nv - 1] - 0.5 * s)
            pres[j] = pj_
            beta[j] = rj / (2.0 * pj_)
            lrho[j] = np.log(rj)
            lbeta[j] = np.log(beta[j])
        for j in range(Nh):
            for v in range(nv):
                r[j, v] = 0.0
            # diagonal terms with the physical flux
            for m in range(d):
                c = qdiag[m, j]
                if c == 0.0:
                    continue
                un = 0.0
                for i in range(d):
                    un += vel[j, i] * dirs[k, m, i]
                r[j, 0] += c * rho[j] * un
                for i in range(d):
                    r[j, 1 + i] += c * (rho[j] * un * vel[j, i] + pres[j] * dirs[k, m, i])
                r[j, nv - 1] += c * un * (ut[k, j, nv - 1] + pres[j])
        for p in range(P):
            a = pj[p]
            b = pk[p]
            rho_log = _log_mean(rho[a], rho[b], lrho[a], lrho[b], eps)
            beta_log = _log_mean(beta[a], beta[b], lbeta[a], lbeta[b], eps)
            p_avg = (rho[a] + rho[b]) / (2.0 * (beta[a] + beta[b]))
            vbar2 = 0.0
            for i in range(d):
                vavg[i] = 0.5 * (vel[a, i] + vel[b, i])
                vbar2 += vavg[i] * vavg[i]
            h = 1.0 / (2.0 * gm1 * beta_log) - 0.25 * (v2[a] + v2[b]) + vbar2
            for m in range(d):
                cj = qjk[m, p]
                ck = qkj[m, p]
                if cj == 0.0 and ck == 0.0:
                    continue
                un = 0.0
                for i in range(d):
                    un += vavg[i] * dirs[k, m, i]
                f1 = rho_log * un
                f[0] = f1
                for i in range(d):
                    f[1 + i] = f1 * vavg[i] + p_avg * dirs[k, m, i]
                f[nv - 1] = f1 * h + p_avg * un
                for v in range(nv):
                    r[a, v] += cj * f[v]
                    r[b, v] += ck * f[v]
        for q in range(Np):
            for v in range(nv):
                s = 0.0
                for j in range(Nh):
                    s += lift[q, j] * r[j, v]
                out[k, q, v] = s
    return out
