"""Physical-space norms of radial trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .radial import check_aliasing, inversion_matrix, plancherel_l2

FRONT_SPEED = 1.5       # above the sound speed sqrt(5/3)


@dataclass
class PhysicalNorms:
    times: np.ndarray
    L2: np.ndarray          # (n_orders, n_times): sup_xi <xi>^beta ||g(., xi)||_{L^2_x}
    Linf: np.ndarray        # (n_orders, n_times): sup_{x, xi} <xi>^beta |g(x, xi)|
    beta: float


def default_xgrid(t_max, dx=0.5):
    x_max = FRONT_SPEED * t_max + 6 * np.sqrt(t_max) + 20
    return np.arange(0.0, x_max + dx, dx)


def support_radius(t):
    """|x| beyond which the field is negligible: sound front plus diffusive width."""
    return FRONT_SPEED * t + 6 * np.sqrt(t) + 20


def physical_norms(traj, beta=None, x=None, orders=None, alias_tol=1e-3):
    """Weighted L^2_x and L^inf_x norms of every stored order and time.

    With the default x-grid the sup at time t runs over |x| <= support_radius(t),
    which keeps oscillatory quadrature noise far outside the solution out of
    the maximum.  An explicit ``x`` is used as given at every time.
    """
    grid, rg = traj.grid, traj.rgrid
    beta = grid.beta if beta is None else beta
    wb = grid.bracket(beta)
    orders = range(traj.n_orders) if orders is None else orders
    explicit = x is not None
    x = default_xgrid(traj.times[-1]) if x is None else np.asarray(x, dtype=float)
    T = inversion_matrix(rg, x)
    check_aliasing(rg, traj.profiles[0, 0], alias_tol)
    nt = len(traj.times)
    L2 = np.zeros((len(orders), nt))
    Li = np.zeros((len(orders), nt))
    for a, s in enumerate(orders):
        for it, t in enumerate(traj.times):
            gh = traj.profiles[s, it]
            L2[a, it] = np.max(wb * plancherel_l2(rg, gh))
            rows = slice(None) if explicit else slice(0, int(np.searchsorted(x, support_radius(t), "right")))
            g = T[rows] @ gh
            Li[a, it] = np.max(np.abs(g) * wb) if g.size else 0.0
    return PhysicalNorms(traj.times.copy(), L2, Li, float(beta))


def x_space_l2(traj, order, it, x):
    """Per-node L^2_x norm from direct inversion on an x-grid (trapezoid in |x|)."""
    T = inversion_matrix(traj.rgrid, x)
    g = T @ traj.profiles[order, it]
    dens = 4 * np.pi * x[:, None] ** 2 * np.abs(g) ** 2
    return np.sqrt(trapezoid(dens, x, axis=0))
