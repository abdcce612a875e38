"""Per-wavenumber symbols, fluid branches and spectral-gap sweeps.

The wavevector is aligned with the xi_z axis, so the symbol is
A(eta) = -i eta diag(xi_z) + mu L.  Eigenproblems are solved in the
sqrt(w)-scaled coordinates where L is a real symmetric matrix; the
spectrum is the same as in nodal coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from .velocity_ops.operator import LinearOperator, gap_estimate, macro_basis

log = logging.getLogger(__name__)


class SpectralError(RuntimeError):
    pass


class BranchAmbiguity(SpectralError):
    def __init__(self, eta, msg):
        super().__init__(f"{msg} at eta={eta:.6g}; refine the eta grid near this value")
        self.eta = eta


class GapCertificationError(SpectralError):
    def __init__(self, eta, value):
        super().__init__(f"gap certification failed: max Re sigma = {value:.4g} >= 0 "
                         f"at eta={eta:.6g}")
        self.eta = eta
        self.value = value


class CouplingError(ValueError):
    pass


# ------------------------------------------------------------------ symbols

@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    eta: float
    mu: float
    A: np.ndarray            # sqrt(w)-scaled coordinates
    sw: np.ndarray = field(repr=False)

    def nodal(self):
        """The same matrix acting on nodal values."""
        return self.A / self.sw[:, None] * self.sw[None, :]

    def eigvals(self):
        return np.linalg.eigvals(self.A)

    def eig(self):
        return np.linalg.eig(self.A)


def _sym(op):
    if "sym" not in op.grid._cache or op.grid._cache["sym"][0] is not op:
        op.grid._cache["sym"] = (op, op.symmetric())
    return op.grid._cache["sym"][1]


def assemble_symbol(op, eta, mu=1.0):
    """A(eta) = -i eta xi_z + mu L for a single species or one SG block."""
    if not isinstance(op, LinearOperator):
        raise TypeError("op must be a LinearOperator")
    if mu <= 0:
        raise SpectralError(f"species multiplier must be positive (got {mu:g})")
    S = _sym(op)
    A = (mu * S).astype(complex)
    A[np.diag_indices_from(A)] += -1j * eta * op.grid.xi_z
    return SymbolMatrix(float(eta), float(mu), A, np.sqrt(op.grid.weights))


def _macro_frame(grid):
    mb = macro_basis(grid)
    sw = np.sqrt(grid.weights)
    return mb, (mb.vectors * sw).T


def macro_overlap(Q, V):
    """||Q^T v|| / ||v|| for each eigenvector column v."""
    return np.linalg.norm(Q.T @ V, axis=0) / np.linalg.norm(V, axis=0)


# ----------------------------------------------------------------- branches

@dataclass
class BranchFit:
    j: int
    etas: np.ndarray
    sigma: np.ndarray
    a: float
    A: float
    residual: float
    sigma0: complex = 0.0
    available: bool = True


def _longitudinal(mb):
    return [i for i, lab in enumerate(mb.labels) if lab in ("chi0", "chi3", "chi4")]


def _label_initial(lam, V, Q, mb, n):
    """Assign branch labels 0..n-1 at the first eta."""
    order = np.argsort(np.imag(lam))
    idx = {0: order[0], 1: order[-1]}            # Im sigma_0 = -a_0 eta < 0
    rest = list(order[1:-1])
    if n == 3:
        idx[2] = rest[0]
        return [idx[j] for j in range(3)]
    # full3d: thermal mode lives in span{chi0, chi3, chi4}; shear in chi1, chi2
    lon = _longitudinal(mb)
    w = [np.linalg.norm(Q[:, lon].T @ V[:, i]) for i in rest]
    t = rest[int(np.argmax(w))]
    shear = [i for i in rest if i != t]
    idx[2] = t
    idx[3], idx[4] = shear
    return [idx[j] for j in range(5)]


def branch_track(op, etas, n_candidates=None, min_overlap=0.5):
    """Track the fluid eigenvalues over an increasing eta list.

    Returns five BranchFit objects; in axisym2d mode j = 3, 4 carry
    ``available=False`` because the shear modes are not representable.
    """
    etas = np.asarray(etas, dtype=float)
    if len(etas) < 6 or np.any(np.diff(etas) <= 0) or etas[0] <= 0:
        raise SpectralError("eta list must be positive, increasing, with >= 6 samples")
    mb, Q = _macro_frame(op.grid)
    n = Q.shape[1]
    nc = n_candidates or 2 * n
    sig = np.zeros((len(etas), n), dtype=complex)
    prev = None
    for it, eta in enumerate(etas):
        lam, V = assemble_symbol(op, eta).eig()
        V = V / np.linalg.norm(V, axis=0)
        ov = macro_overlap(Q, V)
        cand = np.argsort(-ov)[:nc]
        if prev is None:
            pick = _label_initial(lam[cand[:n]], V[:, cand[:n]], Q, mb, n)
            sel = cand[:n][pick]
        else:
            M = np.abs(prev.conj().T @ V[:, cand])
            rows, cols = linear_sum_assignment(-M)
            cols = cols[np.argsort(rows)]
            sel = cand[cols]
            for j in range(n):
                best = M[j, cols[j]]
                rival = M[j].copy()
                rival[cols[j]] = -1.0
                c2 = int(np.argmax(rival))
                if best < min_overlap or rival[c2] > 0.9 * best:
                    # a degenerate pair (equal eigenvalues) is harmless
                    gap = abs(lam[cand[c2]] - lam[sel[j]])
                    if gap > 1e-8 * max(1.0, abs(lam[sel[j]])):
                        raise BranchAmbiguity(eta, f"branch {j} overlap {best:.3f} "
                                                   f"vs {rival[c2]:.3f}")
        sig[it] = lam[sel]
        prev = V[:, sel]

    lam0 = np.linalg.eigvals(assemble_symbol(op, 0.0).A)
    sig0 = lam0[np.argsort(np.abs(lam0))[:n]]
    fits = []
    lo, hi = etas[0], etas[-1]
    win = etas <= lo + (hi - lo) / 3
    if win.sum() < 3:
        win = np.arange(len(etas)) < 3
    e = etas[win]
    for j in range(n):
        s = sig[win, j]
        a = float(-np.sum(s.imag * e) / np.sum(e ** 2))
        A = float(-np.sum(s.real * e ** 2) / np.sum(e ** 4))
        model = -1j * a * e - A * e ** 2
        res = float(np.sqrt(np.mean(np.abs(s - model) ** 2)) /
                    max(np.sqrt(np.mean(np.abs(s) ** 2)), 1e-300))
        fits.append(BranchFit(j, etas.copy(), sig[:, j].copy(), a, A, res,
                              complex(sorted(sig0, key=abs)[j] if j < len(sig0) else 0)))
    for j in range(n, 5):
        fits.append(BranchFit(j, etas.copy(), np.full(len(etas), np.nan + 0j),
                              float("nan"), float("nan"), float("nan"), 0j, available=False))
    return fits


# --------------------------------------------------------------------- gaps

@dataclass
class GapCertificate:
    delta: float
    tau: float
    etas: np.ndarray
    max_re: np.ndarray           # per eta, excluding fluid branches below delta
    max_re_all: float            # over every eigenvalue (dissipativity check)
    eta_worst: float
    mus: tuple = (1.0,)
    eta0_nonfluid_max: float = float("nan")
    note: str = "sampling-based; valid on the sampled eta set only"


def gap_certify(op, delta=0.3, eta_max=10.0, n_samples=100, mus=(1.0,), n_fluid=None,
                raise_on_fail=True):
    """Sampled spectral gap of A(eta) over [0, eta_max] for each multiplier mu."""
    if n_samples < 50:
        raise SpectralError("gap certification needs n_samples >= 50")
    _, Q = _macro_frame(op.grid)
    nf = Q.shape[1] if n_fluid is None else n_fluid
    etas = np.linspace(0.0, eta_max, n_samples)
    max_re = np.full(n_samples, -np.inf)
    max_all = -np.inf
    eta0 = -np.inf
    for mu in mus:
        for i, eta in enumerate(etas):
            sm = assemble_symbol(op, eta, mu)
            if eta < delta:
                lam, V = sm.eig()
                ov = macro_overlap(Q, V)
                keep = np.ones(len(lam), bool)
                keep[np.argsort(-ov)[:nf]] = False
                rest = lam[keep]
                if eta == 0.0:
                    eta0 = max(eta0, float(rest.real.max()))
            else:
                lam = sm.eigvals()
                rest = lam
            max_all = max(max_all, float(lam.real.max()))
            max_re[i] = max(max_re[i], float(rest.real.max()))
    k = int(np.argmax(max_re))
    tau = float(-max_re[k])
    cert = GapCertificate(float(delta), tau, etas, max_re, max_all, float(etas[k]),
                          tuple(float(m) for m in mus), eta0)
    if tau <= 0 and raise_on_fail:
        raise GapCertificationError(float(etas[k]), float(max_re[k]))
    return cert


@dataclass
class CoupledGap:
    bound: float
    gamma_eff: float
    nu1: float
    m: float
    nominal_bound: float
    rayleigh_max: float
    exact_sup: float


def _infer_m(W):
    d = np.diag(W)
    if len(d) < 2:
        return 0.0
    return float(np.log(d[1] / d[0]) / np.log(2.0))


def coupled_gap_estimate(B, W, op, gamma=None, m=None, nu1=None, n_rayleigh=50, seed=0):
    """Weighted dissipation bound for the coupled operator B (x) L.

    With M = W B W^{-1} and Ms its symmetric part, Gershgorin gives
    lambda_min(Ms) >= 1 - max off-diagonal row sum = 1 - (2^m + 1) gamma_eff,
    hence -(u, (Ms (x) L) u) >= (1 - (2^m+1) gamma_eff) nu_1 ||P1 u||^2.
    """
    B = np.asarray(B, dtype=float)
    W = np.asarray(W, dtype=float)
    K = len(B)
    m = _infer_m(W) if m is None else float(m)
    if gamma is None:
        off = B - np.diag(np.diag(B))
        gamma = float(np.abs(off).max(initial=0.0))
    limit = 1.0 / (2 ** m + 1)
    if gamma >= limit:
        raise CouplingError(f"coupling too strong: gamma = {gamma:g} >= 1/(2^m+1) = "
                            f"{limit:g} for m = {m:g}")
    nu1 = gap_estimate(op) if nu1 is None else float(nu1)
    M = W @ B @ np.linalg.inv(W)
    Ms = 0.5 * (M + M.T)
    d = np.diag(Ms)
    rows = np.sum(np.abs(Ms), axis=1) - np.abs(d)
    gamma_eff = float(np.max(rows / d) / (2 ** m + 1)) if K > 1 else 0.0
    lam_lo = float(np.min(d - rows))
    bound = lam_lo * nu1
    if bound <= 0:
        raise CouplingError(f"coupled gap bound {bound:.4g} <= 0: the weighted coupling "
                            f"violates gamma < 1/(2^m+1) = {limit:g}")
    # direct Rayleigh check on random microscopic vectors
    mb, Q = _macro_frame(op.grid)
    S = _sym(op)
    rng = np.random.default_rng(seed)
    rq = -np.inf
    for _ in range(n_rayleigh):
        U = rng.standard_normal((K, op.grid.N))
        U -= (U @ Q) @ Q.T
        num = np.sum(Ms * (U @ S @ U.T))
        rq = max(rq, float(num / np.sum(U * U)))
    exact = -float(np.linalg.eigvalsh(Ms).min()) * nu1
    return CoupledGap(float(bound), gamma_eff, float(nu1), m, (1 - 2 * gamma) * nu1, rq, exact)
