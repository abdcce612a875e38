"""Stochastic Galerkin system for kernels linear in z, and collocation references.

For b(s, z) = c(z) s the Galerkin projection of L^z onto psi_1..psi_K is
B (x) L with B = S / b_0 and L the operator at the mean kernel.  B is
symmetric, so the system decouples along its eigenvectors into K
single-species problems with multipliers mu_k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gpc_basis import GpcBasis, _gauss_rule, _psi, make_basis, pair_tensor, triple_tensor
from .velocity_ops.collision import CollisionModel
from .velocity_ops.gamma import pair_integrals
from .velocity_ops.operator import LinearOperator, assemble_L, macro_basis, macro_project
from .whole_space.norms import physical_norms
from .whole_space.propagate import (FourierTrajectory, InitialData, PropagationError,
                                    default_times, evolve)
from .whole_space.radial import radial_grid


class SGError(ValueError):
    pass


# ----------------------------------------------------------------- operator

@dataclass(frozen=True, eq=False)
class SgOperator:
    B: np.ndarray
    L: LinearOperator
    basis: GpcBasis
    mu: np.ndarray
    V: np.ndarray                  # B = V diag(mu) V^T

    @property
    def K(self):
        return len(self.B)

    def apply(self, F):
        """(B (x) L) F for stacked fields F of shape (K, N)."""
        F = np.asarray(F)
        return self.B @ (F @ self.L.matrix.T)

    def dense(self):
        return np.kron(self.B, self.L.matrix)


def assemble_sg(op, basis, model):
    """Coupled operator for the proportional family; op is L at the mean kernel."""
    if not isinstance(model, CollisionModel) or model.family != "proportional":
        raise SGError("the stochastic Galerkin solver requires a collision kernel linear "
                      "in z (proportional family); use collocation for other families")
    if op.z != 0.0 or op.k != 0:
        raise SGError("op must be the order-0 operator at z = 0 (the mean kernel)")
    _, B = pair_tensor(basis, model)
    if not np.allclose(B, B.T, atol=1e-13):
        raise SGError("coefficient matrix B is not symmetric")
    B = 0.5 * (B + B.T)
    mu, V = np.linalg.eigh(B)
    return SgOperator(B, op, basis, mu, V)


# ---------------------------------------------------------------- evolution

@dataclass
class SgTrajectory:
    sg: SgOperator
    times: np.ndarray
    rgrid: object
    profiles: np.ndarray        # (K, n_t, n_r, N) chaos coefficients in Fourier form
    L2w: np.ndarray = None      # weighted norms per time
    Linfw: np.ndarray = None

    def at(self, z):
        """Reconstruction sum_k f_k psi_k(z) at scalar z, shape (n_t, n_r, N)."""
        return np.tensordot(self.sg.basis(np.atleast_1d(z))[0], self.profiles, axes=(0, 0))


def weighted_norms(profiles, weights, grid, rgrid, times, beta=None):
    """||W f||: sup_xi <xi>^beta (sum_k w_k^2 ||f_k||^2)^{1/2} in L^2_x and L^inf_x."""
    from .whole_space.norms import default_xgrid, support_radius
    from .whole_space.radial import inversion_matrix, plancherel_l2
    beta = grid.beta if beta is None else beta
    wb = grid.bracket(beta)
    x = default_xgrid(times[-1])
    T = inversion_matrix(rgrid, x)
    L2 = np.zeros(len(times))
    Li = np.zeros(len(times))
    for it, t in enumerate(times):
        p2 = np.zeros(grid.N)
        pinf = None
        n = int(np.searchsorted(x, support_radius(t), "right"))
        for k, wk in enumerate(weights):
            gh = profiles[k, it]
            p2 += wk ** 2 * plancherel_l2(rgrid, gh) ** 2
            g = np.abs(T[:n] @ gh) ** 2 * wk ** 2
            pinf = g if pinf is None else pinf + g
        L2[it] = np.max(wb * np.sqrt(p2))
        Li[it] = np.max(wb * np.sqrt(pinf))
    return L2, Li


def evolve_sg(sg, H, times=None, rgrid=None, W=None, phi=None, norms=True):
    """Propagate chaos-coefficient initial data H (K, N) through B (x) L."""
    H = np.asarray(H, dtype=float)
    if H.shape != (sg.K, sg.L.grid.N):
        raise SGError(f"initial state must have shape ({sg.K}, {sg.L.grid.N})")
    if not np.allclose(sg.B, sg.B.T, atol=1e-13):
        raise SGError("coefficient matrix B is not symmetric")
    times = default_times() if times is None else np.asarray(times, dtype=float)
    rgrid = radial_grid() if rgrid is None else rgrid
    Hr = sg.V.T @ H
    out = np.zeros((sg.K,) + (len(times), len(rgrid), sg.L.grid.N), dtype=complex)
    for j, mu in enumerate(sg.mu):
        if not np.any(Hr[j]):
            continue
        tr = evolve([sg.L.scaled(mu)], InitialData(Hr[j][None], "macro", phi), times, rgrid)
        out += sg.V[:, j][:, None, None, None] * tr.profiles[0][None]
    traj = SgTrajectory(sg, times, rgrid, out)
    if norms:
        w = np.ones(sg.K) if W is None else np.diag(W)
        traj.L2w, traj.Linfw = weighted_norms(out, w, sg.L.grid, rgrid, times)
    return traj


def evolve_dense(sg, H, times, r):
    """Brute-force propagation of the K N block matrix at one wavenumber."""
    import scipy.linalg as sla
    grid = sg.L.grid
    A = sg.dense().astype(complex)
    A[np.diag_indices_from(A)] += -1j * r * np.tile(grid.xi_z, sg.K)
    y0 = np.asarray(H, dtype=complex).reshape(-1)
    return np.array([(sla.expm(A * t) @ y0).reshape(sg.K, -1) for t in times])


# ----------------------------------------------------------- nonlinear term

def sg_gamma(H, U, basis, grid, model, ceiling=12 ** 3, **kw):
    """Gamma_k = 1/2 sum_ij S'_kij Gamma(h_i, u_j) with the unit kernel b = s."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if len(H) != basis.K or len(U) != basis.K:
        raise SGError("states must have one component per basis function")
    T, mask = triple_tensor(basis, model)
    if not np.any(H) or not np.any(U):
        return np.zeros_like(H)
    unit = CollisionModel("proportional", b1=0.0, c_z=model.c_z, alpha=model.alpha)
    P = pair_integrals(H, U, grid, unit, ceiling=ceiling, **kw)     # (N, K, K)
    return 0.5 * np.einsum("kij,nij->kn", np.where(mask, T, 0.0), P)


def weighted_sup(F, W, grid, beta=None, nu=None):
    """max_xi <xi>^beta (sum_k w_k^2 f_k^2)^{1/2}, optionally divided by nu."""
    beta = grid.beta if beta is None else beta
    w = np.diag(W)
    v = np.sqrt(np.sum((w[:, None] * F) ** 2, axis=0)) * grid.bracket(beta)
    if nu is not None:
        v = v / nu
    return float(v.max())


# ----------------------------------------------------------- collocation

def gauss_nodes(family, Q):
    return _gauss_rule(make_basis(family, 1).family, Q)


@dataclass
class CollocationReference:
    model: CollisionModel
    family: str
    nodes: np.ndarray
    weights: np.ndarray
    times: np.ndarray
    rgrid: object
    profiles: np.ndarray          # (Q, n_t, n_r, N)
    grid: object
    data: object = field(repr=False, default=None)

    def coefficients(self, K):
        """Exact-quadrature chaos coefficients of the reference, (K, n_t, n_r, N)."""
        if 2 * K > len(self.nodes):
            raise SGError(f"reference with {len(self.nodes)} nodes cannot resolve K={K}")
        V = _psi(self.family, K, self.nodes)
        return np.tensordot((V * self.weights[:, None]).T, self.profiles, axes=(1, 0))


def collocation_reference(model, grid, data, n_nodes, times, rgrid=None, k_max=None,
                          family="legendre", nphi=48, cache=None):
    """Independent single-species solves at the Gauss nodes of the z-measure.

    ``data(z)`` returns the nodal velocity profile at z (spatial factor
    exp(-r^2/2) shared by all nodes).
    """
    if k_max is not None and n_nodes < 2 * k_max:
        raise SGError(f"collocation needs at least 2 K_max = {2 * k_max} nodes, "
                      f"got {n_nodes}")
    z, w = gauss_nodes(family, n_nodes)
    rgrid = radial_grid() if rgrid is None else rgrid
    times = np.asarray(times, dtype=float)
    prof = np.empty((n_nodes, len(times), len(rgrid), grid.N), dtype=complex)
    for q, zq in enumerate(z):
        op = assemble_L(grid, model, float(zq), 0, nphi, cache)
        tr = evolve([op], InitialData(np.asarray(data(zq), dtype=float)[None], "macro"),
                    times, rgrid)
        prof[q] = tr.profiles[0]
    return CollocationReference(model, make_basis(family, 1).family, z, w, times, rgrid,
                                prof, grid, data)


# ------------------------------------------------------------- error curves

@dataclass
class GpcErrorCurve:
    Ks: list
    times: np.ndarray
    total_L2: np.ndarray          # (n_K, n_t)
    total_Linf: np.ndarray
    proj_L2: np.ndarray
    num_L2: np.ndarray
    reference: str
    spectral_residual: float = float("nan")
    algebraic_residual: float = float("nan")
    loglog_slope: float = float("nan")

    def rows(self):
        for a, K in enumerate(self.Ks):
            for it, t in enumerate(self.times):
                yield (K, float(t), self.total_L2[a, it], self.total_Linf[a, it],
                       self.proj_L2[a, it], self.num_L2[a, it])


def _node_norms(fields, ref, beta):
    """max over z nodes of the L^2_x and L^inf_x weighted norms per time."""
    n_t = fields.shape[1]
    L2 = np.zeros(n_t)
    Li = np.zeros(n_t)
    for F in fields:
        tr = FourierTrajectory(ref.grid, ref.rgrid, ref.times, F[None])
        pn = physical_norms(tr, beta, alias_tol=np.inf)
        L2 = np.maximum(L2, pn.L2[0])
        Li = np.maximum(Li, pn.Linf[0])
    return L2, Li


def gpc_error_curve(Ks, ref, op, beta=None, fit_time_index=-1):
    """gPC error f - f^K against a collocation reference, split into
    projection error f - P_K f and numerical error P_K f - f^K."""
    Ks = list(Ks)
    if 2 * max(Ks) > len(ref.nodes):
        raise SGError(f"max K = {max(Ks)} needs a reference with more than {2 * max(Ks)} "
                      f"nodes (has {len(ref.nodes)})")
    nt = len(ref.times)
    tot2, toti, prj2, num2 = (np.zeros((len(Ks), nt)) for _ in range(4))
    Vq_all = _psi(ref.family, max(Ks), ref.nodes)
    H_nodes = np.array([ref.data(z) for z in ref.nodes])            # (Q, N)
    for a, K in enumerate(Ks):
        basis = make_basis(ref.family, K)
        sg = assemble_sg(op, basis, ref.model)
        Vq = Vq_all[:, :K]
        H = (Vq * ref.weights[:, None]).T @ H_nodes                # projected initial data
        traj = evolve_sg(sg, H, ref.times, ref.rgrid, norms=False)
        fK = np.tensordot(Vq, traj.profiles, axes=(1, 0))          # at reference nodes
        PK = np.tensordot(Vq, ref.coefficients(K), axes=(1, 0))
        tot2[a], toti[a] = _node_norms(ref.profiles - fK, ref, beta)
        prj2[a], _ = _node_norms(ref.profiles - PK, ref, beta)
        num2[a], _ = _node_norms(PK - fK, ref, beta)
    curve = GpcErrorCurve(Ks, ref.times.copy(), tot2, toti, prj2, num2,
                          f"collocation at {len(ref.nodes)} {ref.family} nodes")
    e = tot2[:, fit_time_index]
    if np.all(e > 0) and len(Ks) >= 3:
        k = np.array(Ks, dtype=float)
        ls = np.polyfit(k, np.log(e), 1, full=True)
        ll = np.polyfit(np.log(k), np.log(e), 1, full=True)
        curve.spectral_residual = float(np.sqrt(ls[1][0] / len(k))) if len(ls[1]) else 0.0
        curve.algebraic_residual = float(np.sqrt(ll[1][0] / len(k))) if len(ll[1]) else 0.0
        curve.loglog_slope = float(ll[0][0])
    return curve
