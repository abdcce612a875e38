"""Per-wavenumber propagation of g and its z-derivatives.

For each radial wavenumber r the symbol A = -i r xi_z + L^z is
diagonalized once, A = V diag(lam) V^{-1}.  In eigen-coordinates the
sensitivity hierarchy

    d_t g_s = A g_s + sum_{j=1}^{s} binom(s, j) (d^j_z L^z) g_{s-j}

is solved in closed form with divided differences of t -> e^{lam t}:

    f[a, b]    = (e^{a t} - e^{b t}) / (a - b),
    f[a, b, c] = (f[a, b] - f[a, c]) / (b - c).

Well separated eigenvalue pairs use partial fractions (matrix-vector
products per time); nearly equal pairs are summed directly with
cancellation-free formulas.  An ill-conditioned eigenbasis falls back
to the matrix exponential of the block-augmented system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from math import comb

import numpy as np
import scipy.linalg as sla

from ..velocity_ops.operator import LinearOperator, macro_basis, macro_project
from .radial import RadialGrid, radial_grid

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
FALLBACK_TOL = 1e-8


class PropagationError(RuntimeError):
    pass


# ------------------------------------------------------- divided differences

def phi1(u):
    """(e^u - 1) / u, accurate near 0."""
    u = np.asarray(u, dtype=complex)
    small = np.abs(u) < 1e-2
    us = np.where(small, 1.0, u)
    out = np.atleast_1d(np.expm1(us) / us)
    s = u[small]
    out[small.reshape(out.shape)] = 1 + s / 2 + s ** 2 / 6 + s ** 3 / 24 + s ** 4 / 120 + s ** 5 / 720
    return out.reshape(u.shape)


def dphi1(u):
    """d/du phi1(u) = (e^u (u - 1) + 1) / u^2, accurate near 0."""
    u = np.asarray(u, dtype=complex)
    small = np.abs(u) < 1e-2
    us = np.where(small, 1.0, u)
    out = np.atleast_1d((np.exp(us) * (us - 1) + 1) / us ** 2)
    s = u[small]
    out[small.reshape(out.shape)] = 0.5 + s / 3 + s ** 2 / 8 + s ** 3 / 30 + s ** 4 / 144 + s ** 5 / 840
    return out.reshape(u.shape)


def dd2(a, b, t):
    """f[a, b] for f(x) = e^{x t}, with Re parts <= 0 assumed."""
    a, b = np.broadcast_arrays(np.asarray(a, complex), np.asarray(b, complex))
    swap = a.real > b.real
    hi = np.where(swap, a, b)
    lo = np.where(swap, b, a)
    return t * np.exp(hi * t) * phi1((lo - hi) * t)


def dd3(a, b, c, t):
    """f[a, b, c] for f(x) = e^{x t}."""
    a, b, c = np.broadcast_arrays(*(np.asarray(v, complex) for v in (a, b, c)))
    stack = np.stack([a, b, c])
    k = np.argmax(stack.real, axis=0)
    top = np.take_along_axis(stack, k[None], 0)[0]
    # the two remaining arguments, in any order
    others = np.stack([np.where(k == 0, b, a), np.where(k == 2, b, c)])
    x = (others[0] - top) * t
    y = (others[1] - top) * t
    d = x - y
    m = 0.5 * (x + y)
    close = np.abs(d) < 1e-4 * np.maximum(1.0, np.abs(m))
    ds = np.where(close, 1.0, d)
    E2 = np.where(close, dphi1(m), (phi1(x) - phi1(y)) / ds)
    return t * t * np.exp(top * t) * E2


# ---------------------------------------------------------------- data types

@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial data phi(r) h_s(xi) for derivative orders s = 0..len(h)-1."""
    h: np.ndarray                       # (n_orders, N) nodal velocity profiles
    flag: str = "macro"
    phi: object = None                  # callable r -> values; default exp(-r^2/2)

    def profile(self, r):
        if self.phi is None:
            return np.exp(-0.5 * np.asarray(r) ** 2)
        return np.asarray(self.phi(r))

    @property
    def n_orders(self):
        return len(self.h)


def macro_data(grid, n_orders=1, coef=(1.0, 0.5, 0.5)):
    """Macroscopic data: a fixed combination of the representable invariants."""
    mb = macro_basis(grid)
    c = np.zeros(len(mb.vectors))
    lab = list(mb.labels)
    for name, v in zip(("chi0", "chi3", "chi4"), coef):
        c[lab.index(name)] = v
    h = np.zeros((n_orders, grid.N))
    h[0] = c @ mb.vectors
    return InitialData(h, "macro")


def micro_data(grid, n_orders=1):
    """Microscopic data P1[(xi_z(|xi|^2 - 5) + xi_z^2 - |xi|^2/3) sqrt(M)]."""
    mb = macro_basis(grid)
    z = grid.xi_z
    s2 = grid.speed2
    f = (z * (s2 - 5) + z ** 2 - s2 / 3) * grid.sqrtM
    h = np.zeros((n_orders, grid.N))
    h[0] = macro_project(f, mb, "P1")
    h[0] /= grid.norm(h[0])
    return InitialData(h, "micro")


def check_initial(data, grid, tol=1e-10):
    h = np.asarray(data.h)
    if h.ndim != 2 or h.shape[1] != grid.N:
        raise PropagationError(f"initial profiles must have shape (orders, {grid.N})")
    if data.flag == "micro":
        mb = macro_basis(grid)
        for s, hs in enumerate(h):
            p0 = grid.norm(macro_project(hs, mb, "P0"))
            if p0 > tol * max(1.0, grid.norm(hs)):
                raise PropagationError(f"micro data has ||P0 h_{s}|| = {p0:.2e}")


@dataclass(frozen=True, eq=False)
class FourierTrajectory:
    grid: object
    rgrid: RadialGrid
    times: np.ndarray
    profiles: np.ndarray          # (n_orders, n_times, n_r, N), nodal values
    z: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def n_orders(self):
        return self.profiles.shape[0]


def default_times(t_max=400.0, n=60, t_min=0.5):
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, n)])


# -------------------------------------------------------------- propagation

class _ModeSolver:
    """Closed-form propagation at one wavenumber in eigen-coordinates."""

    def __init__(self, lam, V, Vinv, mats, tol):
        self.lam = lam
        self.V = V
        self.Vinv = Vinv
        N = len(lam)
        diff = lam[:, None] - lam[None, :]
        deg = np.abs(diff) <= tol
        with np.errstate(divide="ignore", invalid="ignore"):
            C = np.where(deg, 0.0, 1.0 / np.where(deg, 1.0, diff))
        self.C = C
        self.deg = np.nonzero(deg)
        offd = deg & ~np.eye(N, dtype=bool)
        self.offdeg = np.nonzero(offd)
        self.M = [Vinv @ X @ V for X in mats]          # M[0] is d_z L, M[1] is d_z^2 L
        self._pre = {}

    def _prep(self, key, X):
        if key not in self._pre:
            self._pre[key] = (X * self.C, X[self.deg])
        return self._pre[key]

    def I1(self, key, X, v, E, F2):
        XC, Xd = self._prep(key, X)
        out = E * (XC @ v) - XC @ (E * v)
        I, K = self.deg
        contrib = Xd * F2 * v[K]
        out += np.bincount(I, contrib.real, len(v)) + 1j * np.bincount(I, contrib.imag, len(v))
        return out

    def I2(self, X, Y, v, t, E, F2):
        """sum_{k,l} X_ik Y_kl v_l f[lam_i, lam_k, lam_l]."""
        key = ("I2", id(X), id(Y))
        if key not in self._pre:
            YC = Y * self.C
            XYC = X @ YC
            self._pre[key] = (YC, XYC, X * self.C ** 2)
        YC, XYC, XC2 = self._pre[key]
        out = self.I1(("X", id(X)), X, YC @ v, E, F2) - self.I1(("XYC", id(X), id(Y)), XYC, v, E, F2)
        # pairs k = l: f[lam_i, lam_k, lam_k]
        w = np.diag(Y) * v
        XC, _ = self._prep(("X", id(X)), X)
        Ew = E * w
        out += E * (XC2 @ w) - XC2 @ Ew - t * (XC @ Ew)
        I, K = self.deg
        lam = self.lam
        f3 = dd3(lam[I], lam[K], lam[K], t)
        contrib = X[I, K] * w[K] * f3
        out += np.bincount(I, contrib.real, len(v)) + 1j * np.bincount(I, contrib.imag, len(v))
        # nearly equal pairs k != l, all i
        for k, l in zip(*self.offdeg):
            out += X[:, k] * (Y[k, l] * v[l]) * dd3(lam, lam[k], lam[l], t)
        return out

    def run(self, u0s, times):
        """u0s: (n_orders, N) eigen-coordinates at t=0; returns (n_orders, nt, N)."""
        n_ord = len(u0s)
        lam = self.lam
        I, K = self.deg
        out = np.empty((n_ord, len(times), len(lam)), dtype=complex)
        M1 = self.M[0] if n_ord > 1 else None
        M2 = self.M[1] if n_ord > 2 else None
        for it, t in enumerate(times):
            E = np.exp(lam * t)
            out[0, it] = E * u0s[0]
            if n_ord == 1:
                continue
            F2 = dd2(lam[I], lam[K], t)
            out[1, it] = E * u0s[1] + self.I1(("X", id(M1)), M1, u0s[0], E, F2)
            if n_ord == 2:
                continue
            out[2, it] = (E * u0s[2] + self.I1(("X", id(M2)), M2, u0s[0], E, F2)
                          + 2 * self.I1(("X", id(M1)), M1, u0s[1], E, F2)
                          + 2 * self.I2(M1, M1, u0s[0], t, E, F2))
        return out


def _augmented(A, mats, n_ord):
    N = len(A)
    G = np.zeros((n_ord * N, n_ord * N), dtype=complex)
    for s in range(n_ord):
        G[s * N:(s + 1) * N, s * N:(s + 1) * N] = A
        for j in range(1, s + 1):
            G[s * N:(s + 1) * N, (s - j) * N:(s - j + 1) * N] = comb(s, j) * mats[j - 1]
    return G


def propagate_expm(A, mats, u0s, times, tol=FALLBACK_TOL, max_halvings=6):
    """Block-augmented exponential, stepping between consecutive times.

    Each step exp(G dt) is compared with the square of exp(G dt/2);
    the step is subdivided until the two agree to ``tol``.
    """
    n_ord, N = u0s.shape
    G = _augmented(A, mats, n_ord)
    y = u0s.reshape(-1).astype(complex)
    out = np.empty((n_ord, len(times), N), dtype=complex)
    t_prev = 0.0
    for it, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            for h in range(max_halvings + 1):
                n = 2 ** h
                P = sla.expm(G * (dt / n))
                Ph = sla.expm(G * (dt / (2 * n)))
                y1 = y.copy()
                y2 = y.copy()
                for _ in range(n):
                    y1 = P @ y1
                for _ in range(2 * n):
                    y2 = Ph @ y2
                if np.linalg.norm(y1 - y2) <= tol * max(np.linalg.norm(y2), 1e-300):
                    break
            else:
                raise PropagationError(f"matrix-exponential fallback did not converge "
                                       f"on step to t={t:g}")
            y = y2
        out[:, it] = y.reshape(n_ord, N)
        t_prev = t
    return out


def _symmetric_parts(ops):
    sw = np.sqrt(ops[0].grid.weights)
    return sw, [sw[:, None] * op.matrix / sw[None, :] for op in ops]


def evolve(ops, data, times=None, rgrid=None, cond_limit=COND_LIMIT, deg_tol=None):
    """Propagate initial data with operators ops = [L^z, d_z L^z, d_z^2 L^z, ...].

    ``data`` is an InitialData or a list of them (sharing eigendecompositions).
    Returns one FourierTrajectory per data item (a single one if a single
    InitialData was passed).
    """
    single = isinstance(data, InitialData)
    datas = [data] if single else list(data)
    ops = list(ops)
    if not ops or not all(isinstance(o, LinearOperator) for o in ops):
        raise PropagationError("ops must be a non-empty list of LinearOperator")
    grid = ops[0].grid
    if any(o.grid is not grid and o.grid.hash64() != grid.hash64() for o in ops):
        raise PropagationError("all operators must share one grid")
    if any(o.z != ops[0].z for o in ops):
        raise PropagationError("all operators must share one z")
    n_ord = max(d.n_orders for d in datas)
    if n_ord > len(ops):
        raise PropagationError(f"derivative order {n_ord - 1} needs {n_ord} operators, "
                               f"got {len(ops)}")
    if n_ord > 3:
        raise PropagationError("closed-form propagation supports orders <= 2")
    for d in datas:
        check_initial(d, grid)
    times = default_times() if times is None else np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise PropagationError("times must start at 0 and increase")
    rgrid = radial_grid() if rgrid is None else rgrid
    tol = 1e-3 / max(times[-1], 1.0) if deg_tol is None else deg_tol

    sw, (S, *dS) = _symmetric_parts(ops[:n_ord])
    xi_z = grid.xi_z
    N = grid.N
    prof = [np.empty((d.n_orders, len(times), len(rgrid), N), dtype=complex) for d in datas]
    H = [sw * np.asarray(d.h, dtype=float) for d in datas]     # symmetric coordinates
    n_fallback = 0
    cmax = 0.0
    for q, r in enumerate(rgrid.r):
        A = S.astype(complex)
        A[np.diag_indices(N)] += -1j * r * xi_z
        lam, V = np.linalg.eig(A)
        Vinv = np.linalg.inv(V)
        cond = np.linalg.norm(V, 1) * np.linalg.norm(Vinv, 1)
        cmax = max(cmax, cond)
        if cond > cond_limit:
            n_fallback += 1
            for d, h, p in zip(datas, H, prof):
                u = h * d.profile(r)
                res = propagate_expm(A, dS, u, times)
                p[:, :, q] = res / sw
            continue
        solver = _ModeSolver(lam, V, Vinv, dS, tol)
        for d, h, p in zip(datas, H, prof):
            u = (Vinv @ (h * d.profile(r)).T).T
            res = solver.run(u, times)
            p[:, :, q] = (res @ V.T) / sw
    if times[0] == 0:
        # the initial state is returned exactly, not through the eigenbasis
        for d, p in zip(datas, prof):
            p[:, 0] = np.asarray(d.h, dtype=float)[:, None, :] * d.profile(rgrid.r)[None, :, None]
    info = {"max_cond": float(cmax), "fallback_modes": n_fallback, "deg_tol": tol}
    trajs = [FourierTrajectory(grid, rgrid, times, p, ops[0].z, dict(info)) for p in prof]
    return trajs[0] if single else trajs
