"""Radial wavenumber quadrature and radial Fourier inversion.

For a field radial in x, g(x) = (2 pi)^-3 int e^{i x.eta} g^(|eta|) d eta
reduces to g(|x|) = (2 pi^2 |x|)^-1 int_0^inf r sin(r |x|) g^(r) dr and
||g||^2_{L^2_x} = (2 pi)^-3 4 pi int_0^inf r^2 |g^(r)|^2 dr.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AliasingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RadialGrid:
    r: np.ndarray
    w: np.ndarray
    R: float
    panels: np.ndarray

    def __len__(self):
        return len(self.r)

    def nodes_below(self, r0):
        return int(np.sum(self.r < r0))


def radial_grid(R=10.0, r_fine=0.4, fine_width=0.0125, order=8, growth=0.08):
    """Composite Gauss-Legendre panels on (0, R].

    Panels have width fine_width on (0, r_fine] and max(fine_width, growth r^2)
    beyond.  The r^2 law follows the oscillation of sin(r|x|) over the
    distance a sound front travels while e^{-A r^2 t} is still significant.
    """
    if not 0 < r_fine < R:
        raise ValueError("need 0 < r_fine < R")
    edges = list(np.linspace(0.0, r_fine, int(np.ceil(r_fine / fine_width)) + 1))
    while edges[-1] < R:
        r = edges[-1]
        edges.append(min(R, r + max(fine_width, growth * r * r)))
    if R - edges[-2] < 0.25 * (edges[-2] - edges[-3]):
        edges.pop(-2)
    edges = np.array(edges)
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (b - a) * (x + 1) + a).ravel()
    wr = (0.5 * (b - a) * w).ravel()
    return RadialGrid(r, wr, float(R), edges)


def plancherel_l2(rg, ghat):
    """L^2_x norm per trailing index of a profile ghat(r, ...)."""
    ghat = np.asarray(ghat)
    wt = rg.w * rg.r ** 2
    s = np.tensordot(wt, np.abs(ghat) ** 2, axes=(0, 0))
    return np.sqrt(4 * np.pi / (2 * np.pi) ** 3 * s)


def inversion_matrix(rg, x):
    """T with g(x_i) = sum_q T[i, q] ghat(r_q); x = 0 uses the limit r^2 / (2 pi^2)."""
    x = np.asarray(x, dtype=float)
    r, w = rg.r, rg.w
    T = np.empty((len(x), len(r)))
    zero = x == 0
    xs = np.where(zero, 1.0, x)
    T[:] = w * r * np.sin(np.outer(xs, r)) / (2 * np.pi ** 2 * xs[:, None])
    T[zero] = w * r ** 2 / (2 * np.pi ** 2)
    return T


def check_aliasing(rg, ghat, tol=1e-3):
    """Reject profiles whose Plancherel integrand is still large at r = R."""
    dens = rg.r[:, None] ** 2 * np.abs(np.asarray(ghat).reshape(len(rg.r), -1)) ** 2
    peak = dens.max()
    if peak == 0:
        return 0.0
    ratio = float(dens[-1].max() / peak)
    if ratio > tol:
        raise AliasingError(f"radial integrand at r=R is {ratio:.2e} of its peak; "
                            f"increase R_eta (R={rg.R:g})")
    return ratio
