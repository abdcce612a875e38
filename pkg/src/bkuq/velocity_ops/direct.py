"""Reference quadratures of the linearized operator on callable fields.

Two independent paths evaluate (L_q f)(xi) at given 3D points:

* ``apply_direct``: the 5D collision integral over (xi_*, Omega), written in
  spherical coordinates of the relative velocity V = xi - xi_* with Omega
  measured from V, so that V.Omega >= 0 is the polar range [0, pi/2].
* ``apply_kernel``: -nu f - K1 f + K2 f with the kernel formulas of
  ``kernels``, integrated over eta = xi + d n in spherical coordinates
  centred at xi (the 1/d singularity is absorbed by d^2).

``fields`` is a callable mapping an array of points (..., 3) to values
(..., nf); several fields are handled in one pass.
"""
from __future__ import annotations

import math

import numpy as np

from .collision import collision_frequency
from .grid import sqrt_maxwellian
from .kernels import gain_kernel, loss_kernel


def _gl(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * (x + 1) + a, 0.5 * (b - a) * w


def _frame(e):
    """Two unit vectors completing e to an orthonormal frame."""
    a = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(e, e1)


def _sphere(nc, nphi):
    c, wc = _gl(nc, -1.0, 1.0)
    ph = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
    C, P = np.meshgrid(c, ph, indexing="ij")
    S = np.sqrt(1 - C ** 2)
    n = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    w = (wc[:, None] * np.full(nphi, 2 * np.pi / nphi)[None, :]).ravel()
    return n, w


def apply_direct(points, fields, q=1, n_r=24, n_v=(12, 20), n_omega=(8, 12), span=8.0):
    """(L_q f)(xi) by 5D quadrature of the collision integral."""
    points = np.atleast_2d(points)
    vdirs, vw = _sphere(*n_v)
    th, wth = _gl(n_omega[0], 0.0, np.pi / 2)
    oph = 2 * np.pi * (np.arange(n_omega[1]) + 0.5) / n_omega[1]
    out = []
    for xi in points:
        r, wr = _gl(n_r, 0.0, np.linalg.norm(xi) + span)
        V = r[:, None, None] * vdirs[None, :, :]                 # (nr, nv, 3)
        wV = (wr * r ** 2)[:, None] * vw[None, :]
        xs = xi - V
        acc = 0.0
        fx = fields(xi[None, :])[0]                               # (nf,)
        fs = fields(xs)                                           # (nr, nv, nf)
        sMs = sqrt_maxwellian(np.sum(xs ** 2, -1))
        sMx = sqrt_maxwellian(xi @ xi)
        # loss part: does not depend on Omega
        bmass = 2 * math.pi / (q + 1)
        loss = -(sMs ** 2)[..., None] * fx - (sMs * sMx)[..., None] * fs
        acc = np.tensordot(wV * r[:, None] * bmass, loss, axes=([0, 1], [0, 1]))
        for iv, e in enumerate(vdirs):
            e1, e2 = _frame(e)
            # Omega = cos(t) e + sin(t)(cos(p) e1 + sin(p) e2)
            Om = (np.cos(th)[:, None, None] * e
                  + np.sin(th)[:, None, None] * (np.cos(oph)[None, :, None] * e1
                                                 + np.sin(oph)[None, :, None] * e2))
            wOm = (wth * np.sin(th) * np.cos(th) ** q)[:, None] * np.full(len(oph), 2 * np.pi / len(oph))
            # V.Omega = r cos(t); xi' = xi - r cos(t) Omega
            shift = r[:, None, None, None] * np.cos(th)[None, :, None, None] * Om[None]
            xp = xi - shift
            xps = xs[:, iv][:, None, None, :] + shift
            sMp = sqrt_maxwellian(np.sum(xp ** 2, -1))
            sMps = sqrt_maxwellian(np.sum(xps ** 2, -1))
            gain = sMps[..., None] * fields(xp) + sMp[..., None] * fields(xps)
            wt = (wV[:, iv] * r * sMs[:, iv])[:, None, None] * wOm[None]
            acc = acc + np.tensordot(wt, gain, axes=([0, 1, 2], [0, 1, 2]))
        out.append(acc)
    return np.array(out)


def apply_kernel(points, fields, q=1, n_d=40, n_dir=(24, 32), span=12.0):
    """(L_q f)(xi) = -nu f - K1 f + K2 f from the kernel formulas."""
    points = np.atleast_2d(points)
    dirs, wdir = _sphere(*n_dir)
    out = []
    for xi in points:
        s2x = xi @ xi
        d, wd = _gl(n_d, 0.0, 2 * np.sqrt(s2x) + span)
        eta = xi + d[:, None, None] * dirs[None, :, :]
        s2e = np.sum(eta ** 2, -1)
        dd = np.broadcast_to(d[:, None], s2e.shape)
        proj = -(eta - xi) @ xi                                   # xi.(xi - eta)
        p2 = s2x - proj ** 2 / dd ** 2
        k2 = gain_kernel(q, dd ** 2, p2, s2x - s2e)
        k1 = loss_kernel(q, dd, s2x, s2e)
        wt = (wd * d ** 2)[:, None] * wdir[None, :]
        fe = fields(eta)
        integral = np.tensordot(wt * (k2 - k1), fe, axes=([0, 1], [0, 1]))
        nu = collision_frequency(np.sqrt(s2x), q)
        out.append(integral - nu * fields(xi[None, :])[0])
    return np.array(out)


class SmoothFields:
    """Random axisymmetric smooth fields a_m . phi_m(xi), phi_m fixed.

    The basis mixes sqrt(M) times low-order polynomials in (xi_z, |xi|^2)
    with off-centre Gaussians on the xi_z axis, so fields are not confined
    to the null space.
    """

    def __init__(self, n_fields, seed=0):
        rng = np.random.default_rng(seed)
        self.coef = rng.standard_normal((self.n_basis, n_fields))

    n_basis = 9

    def basis(self, x):
        x = np.asarray(x, dtype=float)
        z = x[..., 2]
        s2 = np.sum(x ** 2, -1)
        sM = sqrt_maxwellian(s2)
        cols = [sM, z * sM, (s2 - 3) * sM, z ** 2 * sM, z * s2 * sM,
                s2 ** 2 * sM * 0.1,
                np.exp(-0.5 * (s2 - 2 * z + 1)),          # centred at (0,0,1)
                np.exp(-0.6 * (s2 + 2 * z + 1)),          # centred at (0,0,-1)
                np.exp(-0.4 * s2) * np.cos(z)]
        return np.stack(cols, axis=-1)

    def __call__(self, x):
        return self.basis(x) @ self.coef
