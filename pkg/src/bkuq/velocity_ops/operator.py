"""Discretized linearized operator, macroscopic basis and projections."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .collision import CollisionModel, collision_frequency
from .grid import VelocityGrid
from .kernels import raw_rows

log = logging.getLogger(__name__)

TOL_OP = 1e-4


class OperatorError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------- invariants

@dataclass(frozen=True, eq=False)
class MacroBasis:
    grid: VelocityGrid
    vectors: np.ndarray        # (n, N), orthonormal in the weighted inner product
    labels: tuple

    def gram(self):
        w = self.grid.weights
        return self.vectors @ (w[:, None] * self.vectors.T)

    def coefficients(self, f):
        return np.tensordot(np.asarray(f), (self.grid.weights * self.vectors).T, axes=(-1, 0))


def _raw_invariants(grid):
    sM = grid.sqrtM
    s2 = grid.speed2
    if grid.mode == "axisym2d":
        cols = [sM, grid.nodes[:, 0] * sM, (s2 - 3) / np.sqrt(6) * sM]
        labels = ("chi0", "chi3", "chi4")
    else:
        x = grid.nodes
        cols = [sM, x[:, 0] * sM, x[:, 1] * sM, x[:, 2] * sM, (s2 - 3) / np.sqrt(6) * sM]
        labels = ("chi0", "chi1", "chi2", "chi3", "chi4")
    return np.array(cols), labels


def macro_basis(grid):
    """Collision invariants re-orthonormalized in the discrete inner product.

    In axisym2d only chi_0, chi_3 = xi_z sqrt(M) and chi_4 are representable.
    """
    cols, labels = _raw_invariants(grid)
    sw = np.sqrt(grid.weights)
    Q, R = np.linalg.qr((cols * sw).T)
    Q = Q * np.sign(np.diag(R))          # keep orientation of chi_j
    return MacroBasis(grid, (Q / sw[:, None]).T.copy(), labels)


def macro_project(f, mb, part="P0"):
    """P0 f = sum_j (f, chi_j) chi_j and P1 = I - P0 along the last axis."""
    f = np.asarray(f)
    p0 = np.tensordot(mb.coefficients(f), mb.vectors, axes=(-1, 0))
    if part == "P0":
        return p0
    if part == "P1":
        return f - p0
    raise ValueError(f"part must be 'P0' or 'P1', got {part!r}")


# ------------------------------------------------------------------ operator

@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Nodal matrix of d^k_z L^z = -diag(nu) + K on a velocity grid."""
    grid: VelocityGrid
    z: float
    k: int
    nu: np.ndarray
    K: np.ndarray
    provenance: str
    raw_defect: float = 0.0
    model: dict = field(default_factory=dict)

    @property
    def matrix(self):
        return self.K - np.diag(self.nu)

    def apply(self, f):
        return np.asarray(f) @ self.matrix.T

    def symmetric(self):
        """D L D^{-1} with D = diag(sqrt(w)); symmetric for a self-adjoint L."""
        sw = np.sqrt(self.grid.weights)
        return sw[:, None] * self.matrix / sw[None, :]

    def scaled(self, c):
        return LinearOperator(self.grid, self.z, self.k, c * self.nu, c * self.K,
                              self.provenance, abs(c) * self.raw_defect, self.model)

    @property
    def is_zero(self):
        return not (np.any(self.nu) or np.any(self.K))


def conservative_projection(grid, Lraw):
    """Return P1 L P1 in nodal form (P1 the weighted projector off invariants).

    The Nystrom matrix annihilates the invariants only up to quadrature error;
    compressing with the exact discrete projector restores the null space and
    symmetry while changing the operator by the size of that defect.
    """
    mb = macro_basis(grid)
    sw = np.sqrt(grid.weights)
    S = sw[:, None] * Lraw / sw[None, :]
    Q = (mb.vectors * sw).T                     # orthonormal columns
    SQ = S @ Q
    QS = Q.T @ S
    QSQ = Q.T @ SQ
    S = S - Q @ QS - SQ @ Q.T + Q @ QSQ @ Q.T
    S = 0.5 * (S + S.T)
    return S / sw[:, None] * sw[None, :]


def null_defect(grid, L, mb=None):
    """max_j ||L chi_j|| over the representable invariants."""
    mb = macro_basis(grid) if mb is None else mb
    r = mb.vectors @ L.T
    return float(np.max(np.sqrt(np.sum(grid.weights * r ** 2, axis=1))))


_BASE = {}


def _base_raw(grid, q, nphi, cache=None):
    """Raw Nystrom matrix of L_q, memoized per grid."""
    key = (grid.hash64(), q, nphi)
    if key not in _BASE:
        _BASE[key] = raw_rows(grid, q, None, nphi)
    return _BASE[key]


def clear_memo():
    _BASE.clear()


def model_hash(model, z, k, nphi):
    return model.hash64(float(z), int(k), int(nphi), "raw-kernel")


def raw_operator_rows(grid, model, z, k, rows, nphi=48):
    """Rows of the uncorrected kernel matrix K_raw = L_raw + diag(nu)."""
    out = np.zeros((len(rows), grid.N))
    for c, q in model.dz_pieces(z, k):
        if c == 0.0:
            continue
        R, nu = raw_rows(grid, q, rows, nphi)
        R[np.arange(len(rows)), rows] += nu[rows]
        out += c * R
    return out


def assemble_L(grid, model, z=0.0, k=0, nphi=48, cache=None, conservative=True,
               max_raw_defect=0.3):
    """Assemble d^k_z L^z on the grid.

    The gain/loss kernels come from kernels.raw_rows (closed form for the
    s^1 piece, tabulated Carleman integral otherwise).  With ``conservative``
    the exact discrete null space is imposed by P1 L P1; the raw invariant
    defect is kept on the operator for reporting.
    """
    if not isinstance(model, CollisionModel):
        raise TypeError("model must be a CollisionModel")
    if k > model.alpha:
        raise OperatorError(f"derivative order k={k} exceeds model alpha={model.alpha}")
    model.check_z(z)
    pieces = model.dz_pieces(z, k)
    N = grid.N
    nu = np.zeros(N)
    for c, q in pieces:
        nu += c * collision_frequency(np.sqrt(grid.speed2), q)

    mh = model_hash(model, z, k, nphi)
    Kraw = cache.load(grid.hash64(), mh) if cache is not None else None
    if Kraw is None:
        Kraw = np.zeros((N, N))
        for c, q in pieces:
            if c == 0.0:
                continue
            Lq, nuq = _base_raw(grid, q, nphi)
            Kraw += c * (Lq + np.diag(nuq))
        if cache is not None:
            cache.store(grid.hash64(), mh, Kraw)
    Lraw = Kraw - np.diag(nu)

    scale = max((abs(c) for c, _ in pieces), default=0.0)
    defect = null_defect(grid, Lraw) if scale else 0.0
    if scale and defect / scale > max_raw_defect:
        raise QuadratureError(f"loss and gain parts disagree on invariants: defect "
                              f"{defect / scale:.3e} > {max_raw_defect:g}; refine the grid")
    L = conservative_projection(grid, Lraw) if conservative and scale else Lraw
    qs = {q for c, q in pieces if c != 0.0}
    tag = "grad-closed-form" if qs <= {1} else "carleman-quadrature"
    if conservative:
        tag += "+conservative"
    return LinearOperator(grid, float(z), int(k), nu, L + np.diag(nu), tag, defect,
                          model.descriptor())


# ------------------------------------------------------------- diagnostics

def nu_bounds(op):
    """Fitted C1, C2 with C1 (1+|xi|) <= nu <= C2 (1+|xi|)."""
    ratio = op.nu / (1 + np.sqrt(op.grid.speed2))
    return float(ratio.min()), float(ratio.max())


def self_adjoint_defect(op, f, g):
    w = op.grid.weights
    a = np.sum(w * op.apply(f) * g)
    b = np.sum(w * f * op.apply(g))
    return float(abs(a - b) / (op.grid.norm(f) * op.grid.norm(g)))


def gap_estimate(op, mb=None):
    """nu_1 estimate: min of -(Lf,f)/||P1 f||^2 over microscopic f (exact)."""
    mb = macro_basis(op.grid) if mb is None else mb
    S = op.symmetric()
    sw = np.sqrt(op.grid.weights)
    Q = (mb.vectors * sw).T
    # orthonormal complement of the invariants
    U, _, _ = np.linalg.svd(Q, full_matrices=True)
    C = U[:, Q.shape[1]:]
    ev = np.linalg.eigvalsh(C.T @ (0.5 * (S + S.T)) @ C)
    return float(-ev.max())


def sampled_gap(op, fields, mb=None):
    """min over given fields of -(L P1 f, P1 f)/||P1 f||^2 (a sampled bound)."""
    mb = macro_basis(op.grid) if mb is None else mb
    f = macro_project(np.atleast_2d(fields), mb, "P1")
    w = op.grid.weights
    num = -np.sum(w * op.apply(f) * f, axis=1)
    den = np.sum(w * f * f, axis=1)
    return float(np.min(num / den))


def kernel_weighted_norm(op, beta=None):
    """||K||: L^inf_{xi,beta} -> L^inf_{xi,beta+1} as a weighted max row sum."""
    beta = op.grid.beta if beta is None else beta
    lo = op.grid.bracket(beta + 1)
    hi = op.grid.bracket(-beta)
    return float(np.max(np.sum(np.abs(lo[:, None] * op.K * hi[None, :]), axis=1)))
