"""Velocity grids and Maxwellian helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib

import numpy as np

MODES = ("axisym2d", "full3d")


class GridError(ValueError):
    pass


def sqrt_maxwellian(speed2):
    """sqrt(M) for the normalized Maxwellian, as a function of |xi|^2."""
    return (2 * np.pi) ** -0.75 * np.exp(-0.25 * speed2)


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    mode: str
    nodes: np.ndarray          # (N, 2) as (xi_z, xi_rho) or (N, 3)
    weights: np.ndarray
    xi_max: float
    beta: float
    shape: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def N(self):
        return len(self.weights)

    @property
    def xi_z(self):
        return self.nodes[:, 0] if self.mode == "axisym2d" else self.nodes[:, 2]

    @property
    def speed2(self):
        return np.sum(self.nodes ** 2, axis=1)

    @property
    def sqrtM(self):
        return sqrt_maxwellian(self.speed2)

    def bracket(self, beta=None):
        """<xi>^beta at the nodes."""
        b = self.beta if beta is None else beta
        return (1.0 + self.speed2) ** (0.5 * b)

    def points3d(self):
        """Nodes as 3D points; axisymmetric nodes are placed in the x-z plane."""
        if self.mode == "full3d":
            return self.nodes
        z, r = self.nodes.T
        return np.stack([r, np.zeros_like(r), z], axis=1)

    def inner(self, f, g):
        return np.sum(self.weights * np.conj(f) * g, axis=-1)

    def norm(self, f):
        return np.sqrt(np.real(self.inner(f, f)))

    def descriptor(self):
        return {"mode": self.mode, "xi_max": float(self.xi_max),
                "shape": list(self.shape), "beta": float(self.beta)}

    def hash64(self):
        h = hashlib.sha256()
        h.update(repr((self.mode, float(self.xi_max), tuple(self.shape))).encode())
        h.update(np.ascontiguousarray(self.nodes, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return int.from_bytes(h.digest()[:8], "little")


def build_grid(mode="axisym2d", xi_max=6.0, resolution=(40, 20), beta=2.0,
               tol_grid=1e-6, min_points=8):
    if mode not in MODES:
        raise GridError(f"unknown grid mode {mode!r}")
    if not beta > 1.5:
        raise GridError(f"beta must exceed 3/2 (got {beta:g})")
    if xi_max < 5:
        raise GridError(f"xi_max must be >= 5 (got {xi_max:g})")
    if np.isscalar(resolution):
        resolution = (int(resolution),) * (3 if mode == "full3d" else 2)
    resolution = tuple(int(n) for n in resolution)
    if min(resolution) < min_points:
        raise GridError(f"resolution {resolution} below {min_points} points per direction")

    if mode == "axisym2d":
        nz, nr = resolution
        hz = 2 * xi_max / nz
        z = -xi_max + hz * (np.arange(nz) + 0.5)
        x, w = np.polynomial.legendre.leggauss(nr)
        r = 0.5 * xi_max * (x + 1)
        wr = 0.5 * xi_max * w
        Z, R = np.meshgrid(z, r, indexing="ij")
        W = hz * wr[None, :] * 2 * np.pi * R
        nodes = np.stack([Z.ravel(), R.ravel()], axis=1)
        weights = W.ravel()
    else:
        if len(resolution) != 3:
            raise GridError("full3d needs three resolutions")
        axes = []
        h = []
        for n in resolution:
            hh = 2 * xi_max / n
            axes.append(-xi_max + hh * (np.arange(n) + 0.5))
            h.append(hh)
        X = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([a.ravel() for a in X], axis=1)
        weights = np.full(len(nodes), np.prod(h))

    grid = VelocityGrid(mode, nodes, weights, float(xi_max), float(beta), resolution)
    mass = maxwellian_mass(grid)
    if abs(mass - 1) > tol_grid:
        raise GridError(f"grid too coarse: discrete Maxwellian mass {mass:.9f} "
                        f"misses 1 by more than {tol_grid:g}")
    return grid


def maxwellian_mass(grid):
    return float(np.sum(grid.weights * grid.sqrtM ** 2))


def full3d_axes(grid):
    """Coordinate axes and spacings of a full3d grid."""
    n = grid.shape
    axes, h = [], []
    for k, nk in enumerate(n):
        hh = 2 * grid.xi_max / nk
        axes.append(-grid.xi_max + hh * (np.arange(nk) + 0.5))
        h.append(hh)
    return axes, np.array(h)
