"""Consistency checks on propagated trajectories."""
from __future__ import annotations

import numpy as np

from ..velocity_ops.operator import assemble_L, macro_basis
from .propagate import InitialData, evolve
from .radial import RadialGrid


def _l2_rxi(traj_like, rg, grid):
    """Discrete L^2 over (r, xi) of an array (n_r, N) per time: returns (n_t,)."""
    w = rg.w[:, None] * grid.weights[None, :]
    return np.sqrt(np.sum(w * np.abs(traj_like) ** 2, axis=(-2, -1)))


def small_radial_grid(r_max=3.0, n=24):
    x, w = np.polynomial.legendre.leggauss(n)
    return RadialGrid(0.5 * r_max * (x + 1), 0.5 * r_max * w, r_max, np.array([0.0, r_max]))


def fd_sensitivity_check(grid, model, z, dz=1e-3, times=None, data=None, rgrid=None,
                         nphi=48, cache=None):
    """max_t ||d_z g - (g(z+dz) - g(z-dz)) / (2 dz)|| / ||d_z g|| over (r, xi).

    When d_z g vanishes identically the absolute discrepancy is returned.
    """
    model.check_z(z + dz)
    model.check_z(z - dz)
    times = np.array([0.0, 1.0, 5.0, 20.0, 80.0]) if times is None else np.asarray(times)
    rgrid = small_radial_grid() if rgrid is None else rgrid
    if data is None:
        mb = macro_basis(grid)
        h = np.zeros((2, grid.N))
        h[0] = mb.vectors[0]
        data = InitialData(h, "macro")
    ops = [assemble_L(grid, model, z, k, nphi, cache) for k in range(2)]
    d0 = InitialData(data.h[:1], data.flag, data.phi)
    tr = evolve(ops, data, times, rgrid)
    tp = evolve([assemble_L(grid, model, z + dz, 0, nphi, cache)], d0, times, rgrid)
    tm = evolve([assemble_L(grid, model, z - dz, 0, nphi, cache)], d0, times, rgrid)
    fd = (tp.profiles[0] - tm.profiles[0]) / (2 * dz)
    ex = tr.profiles[1]
    err = _l2_rxi(ex - fd, rgrid, grid)
    ref = _l2_rxi(ex, rgrid, grid)
    if ref.max() == 0:
        return float(err.max()), err
    # times where d_z g has decayed to roundoff level carry no information
    live = ref > 1e-6 * ref.max()
    rel = np.where(live, err / np.where(live, ref, 1.0), 0.0)
    return float(rel.max()), rel


def commuting_identity_defect(traj, dL):
    """max_t ||d_z g - t (d_z L) g|| / max_t ||d_z g|| over (r, xi).

    Vanishes when d_z L commutes with the symbol, e.g. at zero wavenumber
    for a kernel proportional in z.
    """
    g0 = traj.profiles[0]
    g1 = traj.profiles[1]
    pred = traj.times[:, None, None] * (g0 @ dL.matrix.T)
    err = _l2_rxi(g1 - pred, traj.rgrid, traj.grid)
    ref = _l2_rxi(g1, traj.rgrid, traj.grid)
    return float(err.max() / ref.max()) if ref.max() > 0 else float(err.max())


def moment_drift(traj, order=0, q=0):
    """max over t of the change of the macroscopic moments at radial node q."""
    mb = macro_basis(traj.grid)
    mom = mb.coefficients(traj.profiles[order, :, q])
    return float(np.max(np.abs(mom - mom[0])))


def energy_increments(traj, order=0):
    """max over modes and consecutive times of ||g(t_{n+1})|| - ||g(t_n)||."""
    e = traj.grid.norm(traj.profiles[order])            # (n_t, n_r)
    return float(np.max(np.diff(e, axis=0)))
