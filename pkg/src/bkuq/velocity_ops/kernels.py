"""Gain/loss kernels of the linearized operator and their Nystrom assembly.

With angular factor b(s) = s^q the linearized operator splits as

    L f = -nu_q f - K1_q f + K2_q f,

    k1_q(xi, eta) = 2 pi / (q+1) |xi - eta| sqrt(M(xi)) sqrt(M(eta)),
    k2_q(xi, eta) = (2 pi)^{-3/2} H_q(d, p) / d * exp(-d^2/8 - D^2 / (8 d^2)),

where d = |xi - eta|, D = |xi|^2 - |eta|^2 and p is the distance of xi from
the line through xi and eta's difference direction (the component of xi
orthogonal to xi - eta).  H_q is a Carleman-type radial integral; H_1 = 4 pi,
which gives the classical hard-sphere kernel sqrt(2/pi)/d exp(...).
"""
from __future__ import annotations

from functools import lru_cache
import math

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import i0e

from .collision import collision_frequency
from .grid import sqrt_maxwellian

_PREF = (2 * math.pi) ** -1.5


def carleman_H(q, d, p, n=256, span=10.0):
    """H_q(d, p) by direct quadrature of the radial integrals.

    H_q = 2 pi [ d^{q-1} int rho (d^2+rho^2)^{(1-q)/2} w(rho) drho
                 + int rho^q (rho^2+d^2)^{(1-q)/2} w(rho) drho ],
    w(rho) = exp(-(rho-p)^2/2) i0e(rho p).  The substitution
    rho = d sinh(u) resolves the near-singular scale rho ~ d.
    """
    d = np.asarray(d, dtype=float)[..., None]
    p = np.asarray(p, dtype=float)[..., None]
    x, w = np.polynomial.legendre.leggauss(n)
    umax = np.arcsinh((p + span) / d)
    u = 0.5 * umax * (x + 1)
    wu = 0.5 * umax * w
    rho = d * np.sinh(u)
    jac = d * np.cosh(u)
    rr = np.sqrt(rho ** 2 + d ** 2)         # equals jac
    wt = np.exp(-0.5 * (rho - p) ** 2) * i0e(rho * p) * wu * jac
    t1 = d ** (q - 1) * rho * rr ** (1 - q)
    t2 = rho ** q * rr ** (1 - q)
    return 2 * math.pi * np.sum((t1 + t2) * wt, axis=-1)


@lru_cache(maxsize=8)
def _H_table(q, d_max=24.0, p_max=12.0, nd=400, np_=200):
    # d enters through u = asinh(d / 0.05), which clusters nodes near 0
    u = np.linspace(0.0, np.arcsinh(d_max / 0.05), nd)
    dd = 0.05 * np.sinh(u)
    dd[0] = 1e-6
    pp = np.linspace(0.0, p_max, np_)
    D, P = np.meshgrid(dd, pp, indexing="ij")
    H = carleman_H(q, D, P)
    return RectBivariateSpline(u, pp, H, kx=3, ky=3), d_max, p_max


def H_q(q, d, p):
    if q == 1:
        return np.full(np.shape(d), 4 * math.pi)
    spline, d_max, p_max = _H_table(q)
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=float)
    if d.size and (d.max() > d_max or p.max() > p_max):
        raise ValueError("kernel table range exceeded; velocity cutoff too large")
    u = np.arcsinh(d / 0.05)
    return spline.ev(u.ravel(), p.ravel()).reshape(d.shape)


def gain_kernel(q, d2, p2, D, exact=False):
    """k2_q from squared distance, squared transverse offset and |xi|^2-|eta|^2."""
    d2 = np.maximum(d2, 1e-300)
    d = np.sqrt(d2)
    E = np.exp(-d2 / 8 - D ** 2 / (8 * d2))
    p = np.sqrt(np.maximum(p2, 0.0))
    if q == 1:
        H = 4 * math.pi
    elif exact:
        H = carleman_H(q, d, p)
    else:
        H = H_q(q, d, p)
    return _PREF * H / d * E


def loss_kernel(q, d, s2a, s2b):
    return 2 * math.pi / (q + 1) * d * sqrt_maxwellian(s2a) * sqrt_maxwellian(s2b)


def _geometry(xi, eta):
    """d^2, p^2 and D for 3D point arrays broadcast against each other."""
    diff = xi - eta
    d2 = np.sum(diff ** 2, axis=-1)
    s2x = np.sum(xi ** 2, axis=-1)
    s2e = np.sum(eta ** 2, axis=-1)
    proj = np.sum(xi * diff, axis=-1)
    p2 = s2x - proj ** 2 / np.maximum(d2, 1e-300)
    return d2, p2, s2x - s2e, s2x, s2e


def raw_rows(grid, q, rows=None, nphi=48):
    """Rows of the raw Nystrom matrix (nodal form) of L_q.

    Gain uses singularity subtraction: the identity K2 sqrt(M) = 2 nu sqrt(M)
    fixes the diagonal, so sum_j G_ij (f_j - f_i s_j/s_i) + 2 nu_i f_i.
    Rows are independent of each other, so any subset can be recomputed.
    """
    s2 = grid.speed2
    sM = grid.sqrtM
    nu = collision_frequency(np.sqrt(s2), q)
    W = grid.weights
    N = grid.N
    rows = np.arange(N) if rows is None else np.asarray(rows, dtype=int)
    out = np.zeros((len(rows), N))
    if grid.mode == "axisym2d":
        Z, R = grid.nodes.T
        x, wx = np.polynomial.legendre.leggauss(nphi)
    for row, i in enumerate(rows):
        if grid.mode == "axisym2d":
            delta2 = np.maximum((Z[i] - Z) ** 2 + (R[i] - R) ** 2, 1e-300)
            c = R[i] * R
            # phi = a sinh(u) clusters azimuthal nodes where the pair is closest
            a = np.sqrt(delta2 / c)
            umax = np.arcsinh(np.pi / a)
            uu = 0.5 * umax[:, None] * (x[None, :] + 1)
            ww = 0.5 * umax[:, None] * wx[None, :]
            phi = a[:, None] * np.sinh(uu)
            jac = a[:, None] * np.cosh(uu) * ww / np.pi
            cphi = np.cos(phi)
            d2 = delta2[:, None] + 2 * c[:, None] * (1 - cphi)
            dot = s2[i] - (R[i] * R[:, None] * cphi + Z[i] * Z[:, None])
            p2 = s2[i] - dot ** 2 / d2
            D = (s2[i] - s2)[:, None]
            g = np.sum(gain_kernel(q, d2, p2, D) * jac, axis=1)
            k1 = np.sum(loss_kernel(q, np.sqrt(d2), s2[i], s2[:, None]) * jac, axis=1)
        else:
            P = grid.nodes
            d2, p2, D, _, _ = _geometry(P[i][None, :], P)
            g = gain_kernel(q, d2, p2, D)
            k1 = loss_kernel(q, np.sqrt(d2), s2[i], s2)
        g[i] = 0.0
        g *= W
        k1 *= W
        out[row] = g - k1
        out[row, i] += nu[i] - g @ sM / sM[i]
    return out, nu


def assemble_raw(grid, q, nphi=48):
    """Full raw Nystrom matrix of L_q and the loss frequency nu_q."""
    return raw_rows(grid, q, None, nphi)
