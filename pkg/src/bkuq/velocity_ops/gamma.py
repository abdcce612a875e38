"""Bilinear collision operator Gamma^z on coarse full3d grids.

Gamma(h, u)(xi) = 1/2 int sqrt(M_*) (-h u_* - h_* u + h' u'_* + h'_* u')
                        d^k_z b(cos theta, z) |xi - xi_*| dxi_* dOmega

xi_* runs over the grid quadrature, Omega over a product Gauss rule on the
hemisphere (xi - xi_*).Omega >= 0, and post-collisional values come from
trilinear interpolation with zero extension outside the grid.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .grid import full3d_axes

DEFAULT_CEILING = 16 ** 3


class GammaError(ValueError):
    pass


def _hemisphere(n_theta, n_phi):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    th = 0.25 * np.pi * (x + 1)
    wth = 0.25 * np.pi * w * np.sin(th)
    ph = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    return th, wth, ph, 2 * np.pi / n_phi


@njit(cache=True)
def _interp_all(Fp, lo, h, n, x, y, z, buf, weighted):
    """Trilinear values of every padded field at one point, into buf.

    With ``weighted`` the stored fields are f / sqrt(M) and the result is
    multiplied back by sqrt(M) at the point.
    """
    t0 = min(max((x - lo[0]) / h[0], -1.0), n[0])
    t1 = min(max((y - lo[1]) / h[1], -1.0), n[1])
    t2 = min(max((z - lo[2]) / h[2], -1.0), n[2])
    i = int(np.floor(t0))
    j = int(np.floor(t1))
    k = int(np.floor(t2))
    a, b, c = t0 - i, t1 - j, t2 - k
    i += 1
    j += 1
    k += 1
    for m in range(Fp.shape[0]):
        buf[m] = ((1 - a) * ((1 - b) * ((1 - c) * Fp[m, i, j, k] + c * Fp[m, i, j, k + 1])
                             + b * ((1 - c) * Fp[m, i, j + 1, k] + c * Fp[m, i, j + 1, k + 1]))
                  + a * ((1 - b) * ((1 - c) * Fp[m, i + 1, j, k] + c * Fp[m, i + 1, j, k + 1])
                         + b * ((1 - c) * Fp[m, i + 1, j + 1, k] + c * Fp[m, i + 1, j + 1, k + 1])))
    if weighted:
        sm = (2 * np.pi) ** -0.75 * np.exp(-0.25 * (x * x + y * y + z * z))
        for m in range(Fp.shape[0]):
            buf[m] *= sm


@njit(cache=True)
def _gain_kernel(X, w, sM, Fp, lo, h, n, ct, st, ang, cp, sp, wph, na, nb, weighted, out):
    N = X.shape[0]
    nf = Fp.shape[0]
    A = np.empty(nf)
    B = np.empty(nf)
    for i in range(N):
        for jj in range(N):
            v0 = X[i, 0] - X[jj, 0]
            v1 = X[i, 1] - X[jj, 1]
            v2 = X[i, 2] - X[jj, 2]
            r = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
            if r == 0.0:
                continue
            e0, e1_, e2_ = v0 / r, v1 / r, v2 / r
            # frame (f, g) orthogonal to e
            if abs(e0) < 0.9:
                f0, f1, f2 = 0.0, e2_, -e1_
            else:
                f0, f1, f2 = -e2_, 0.0, e0
            fn = np.sqrt(f0 * f0 + f1 * f1 + f2 * f2)
            f0, f1, f2 = f0 / fn, f1 / fn, f2 / fn
            g0 = e1_ * f2 - e2_ * f1
            g1 = e2_ * f0 - e0 * f2
            g2 = e0 * f1 - e1_ * f0
            pw = w[jj] * r * sM[jj] * wph
            for it in range(ct.shape[0]):
                s = r * ct[it]
                wa = pw * ang[it]
                for ip in range(cp.shape[0]):
                    o0 = ct[it] * e0 + st[it] * (cp[ip] * f0 + sp[ip] * g0)
                    o1 = ct[it] * e1_ + st[it] * (cp[ip] * f1 + sp[ip] * g1)
                    o2 = ct[it] * e2_ + st[it] * (cp[ip] * f2 + sp[ip] * g2)
                    _interp_all(Fp, lo, h, n, X[i, 0] - s * o0, X[i, 1] - s * o1,
                                X[i, 2] - s * o2, A, weighted)
                    _interp_all(Fp, lo, h, n, X[jj, 0] + s * o0, X[jj, 1] + s * o1,
                                X[jj, 2] + s * o2, B, weighted)
                    for p in range(na):
                        for q in range(nb):
                            out[i, p, q] += wa * (A[p] * B[na + q] + B[p] * A[na + q])


def pair_integrals(H, U, grid, model, z=0.0, k=0, n_theta=4, n_phi=8,
                   ceiling=DEFAULT_CEILING, interp="plain"):
    """P[i, a, b] = Gamma(H_a, U_b)(xi_i) for stacked fields H (na, N), U (nb, N)."""
    if grid.mode != "full3d":
        raise GammaError("gamma_eval needs a full3d grid")
    if grid.N > ceiling:
        raise GammaError(f"grid with {grid.N} nodes exceeds the cost ceiling {ceiling}")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    na, nb = len(H), len(U)
    pieces = [(c, q) for c, q in model.dz_pieces(z, k) if c != 0.0]
    N = grid.N
    gain = np.zeros((N, na, nb))
    if not pieces:
        return gain
    X = np.ascontiguousarray(grid.nodes)
    w = grid.weights
    sM = grid.sqrtM
    th, wth, ph, wph = _hemisphere(n_theta, n_phi)
    ang = sum(c * np.cos(th) ** q for c, q in pieces) * wth
    bmass = 2 * np.pi * sum(c / (q + 1) for c, q in pieces)
    axes, h = full3d_axes(grid)
    lo = np.array([ax[0] for ax in axes])
    n = np.array(grid.shape, dtype=float)
    HU = np.concatenate([H, U])
    # zero padding: one layer below, two above, so clipped points read zeros
    shp = tuple(grid.shape)
    Fp = np.zeros((len(HU),) + tuple(s + 3 for s in shp))
    if interp not in ("maxwellian", "plain"):
        raise GammaError(f"unknown interpolation mode {interp!r}")
    weighted = interp == "maxwellian"
    vals = HU / sM if weighted else HU
    Fp[:, 1:-2, 1:-2, 1:-2] = vals.reshape((len(HU),) + shp)
    _gain_kernel(X, w, sM, Fp, lo, h, n, np.cos(th), np.sin(th), ang,
                 np.cos(ph), np.sin(ph), wph, na, nb, weighted, gain)
    # loss part: the Omega integral is analytic
    r = np.sqrt(np.maximum(grid.speed2[:, None] + grid.speed2[None, :]
                           - 2 * X @ X.T, 0.0))
    lw = w[None, :] * r * sM[None, :] * bmass
    loss = (H.T[:, :, None] * (lw @ U.T)[:, None, :]
            + (lw @ H.T)[:, :, None] * U.T[:, None, :])
    return 0.5 * (gain - loss)


def gamma_eval(f, g, grid, model, z=0.0, k=0, **kw):
    """Gamma^z (or its z-derivative of order k) applied to nodal fields f, g."""
    if k > model.alpha:
        raise GammaError(f"derivative order {k} exceeds model alpha={model.alpha}")
    P = pair_integrals(np.atleast_2d(f), np.atleast_2d(g), grid, model, z, k, **kw)
    return P[:, 0, 0]
