"""Orthonormal polynomial chaos bases in a scalar random variable z.

Two families are supported:

* ``legendre``: z uniform on [-1, 1], density 1/2, psi_k = sqrt(2k-1) P_{k-1}.
* ``chebyshev``: density 1/(pi sqrt(1-z^2)), psi_1 = 1, psi_k = sqrt(2) T_{k-1}.

Indices are 1-based in the mathematical sense (psi_1 is the constant),
arrays are 0-based as usual.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import chebyshev as npcheb

FAMILIES = ("legendre", "chebyshev")
_ALIASES = {"uniform-legendre": "legendre", "legendre": "legendre",
            "chebyshev": "chebyshev"}

# tolerance used when verifying that degree-masked entries vanish
MASK_TOL = 1e-10


class BasisError(ValueError):
    pass


def _canonical(family):
    try:
        return _ALIASES[family.lower()]
    except (KeyError, AttributeError):
        raise BasisError(f"unsupported basis family {family!r}; "
                         f"expected one of {sorted(_ALIASES)}") from None


def _gauss_rule(family, Q):
    if family == "legendre":
        x, w = npleg.leggauss(Q)
        return x, w / 2.0
    j = np.arange(1, Q + 1)
    x = np.cos((2 * j - 1) * np.pi / (2 * Q))[::-1]
    return x, np.full(Q, 1.0 / Q)


def _psi(family, K, z):
    """Values psi_k(z), shape (len(z), K)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if family == "legendre":
        V = npleg.legvander(z, K - 1)
        return V * np.sqrt(2 * np.arange(1, K + 1) - 1.0)
    V = npcheb.chebvander(z, K - 1)
    scale = np.full(K, np.sqrt(2.0))
    scale[0] = 1.0
    return V * scale


def min_quadrature_order(K, deg_c=1):
    """Gauss points needed to integrate psi_k psi_i psi_j c(z) exactly."""
    return int(math.ceil((3 * (K - 1) + deg_c + 1) / 2))


@dataclass(frozen=True)
class GpcBasis:
    family: str
    K: int
    nodes: np.ndarray
    weights: np.ndarray
    n: float
    C: float
    vander: np.ndarray = field(repr=False)

    @property
    def Q(self):
        return len(self.nodes)

    def __call__(self, z):
        return _psi(self.family, self.K, z)

    def reconstruct(self, coeffs, z):
        """Evaluate sum_k c_k psi_k(z); coeffs has the basis index first."""
        coeffs = np.asarray(coeffs)
        return np.tensordot(self(z), coeffs, axes=(1, 0))


def make_basis(family, K, quadrature_order=None, deg_c=1):
    family = _canonical(family)
    K = int(K)
    if K < 1:
        raise BasisError("K must be >= 1")
    need = max(min_quadrature_order(K, 1), min_quadrature_order(K, deg_c))
    if quadrature_order is None:
        quadrature_order = need
    if quadrature_order < need:
        raise BasisError(f"quadrature_order={quadrature_order} too small for K={K}: "
                         f"need at least {need} Gauss points")
    z, w = _gauss_rule(family, int(quadrature_order))
    V = _psi(family, K, z)
    n = 0.5 if family == "legendre" else 0.0
    # empirical growth constant, endpoints included (Legendre peaks at +-1)
    probe = _psi(family, K, np.concatenate([z, [-1.0, 1.0]]))
    k = np.arange(1, K + 1)
    C = float(np.max(np.abs(probe).max(axis=0) / k ** n))
    return GpcBasis(family, K, z, w, n, C, V)


def gram(basis):
    V = basis.vander
    return V.T @ (basis.weights[:, None] * V)


def weight_matrix(K, m, n=0.5):
    if not m > n + 1:
        raise BasisError(f"m must exceed n+1 = {n + 1:g} (got m={m:g})")
    return np.diag(np.arange(1, K + 1, dtype=float) ** m)


def _c_values(c, z):
    """c may be a callable, a scalar, or polynomial coefficients (low first)."""
    if callable(c):
        return np.asarray(c(z), dtype=float) * np.ones_like(z)
    coef = np.atleast_1d(np.asarray(c, dtype=float))
    return np.polynomial.polynomial.polyval(z, coef)


def _c_degree(c):
    if callable(c):
        return getattr(c, "degree", None)
    coef = np.trim_zeros(np.atleast_1d(np.asarray(c, dtype=float)), "b")
    return max(len(coef) - 1, 0)


def _zfactor(model):
    """Polynomial z-factor of the angular kernel b(s, z) = c(z) s."""
    if hasattr(model, "z_poly"):
        return model.z_poly()
    return model


def _check_exact(basis, deg, total):
    if deg is None:
        return
    if 2 * basis.Q - 1 < total + deg:
        raise BasisError(f"quadrature with {basis.Q} points is not exact for degree "
                         f"{total + deg}; increase quadrature_order")


def pair_tensor(basis, model):
    """Return (S, B): S_ki = int c psi_k psi_i pi dz and B = S / b_0."""
    c = _zfactor(model)
    deg = _c_degree(c)
    _check_exact(basis, deg, 2 * (basis.K - 1))
    cz = _c_values(c, basis.nodes)
    V = basis.vander
    S = V.T @ ((basis.weights * cz)[:, None] * V)
    b0 = float(np.sum(basis.weights * cz))
    if b0 <= 0:
        raise BasisError("mean of the kernel z-factor must be positive")
    B = S / b0
    if deg is not None:
        band = np.abs(np.subtract.outer(np.arange(basis.K), np.arange(basis.K))) > deg
        B[band] = 0.0
        S[band] = 0.0
    return S, B


def selection_mask(K, deg_c=1):
    """chi_kij = 0 when one degree exceeds the other two plus deg(c)."""
    d = np.arange(K)
    k, i, j = np.meshgrid(d, d, d, indexing="ij")
    bad = (k > i + j + deg_c) | (i > k + j + deg_c) | (j > k + i + deg_c)
    return ~bad


def triple_tensor(basis, model):
    """Return (S', mask) with S'_kij = int c psi_k psi_i psi_j pi dz."""
    c = _zfactor(model)
    deg = _c_degree(c)
    _check_exact(basis, deg, 3 * (basis.K - 1))
    cz = _c_values(c, basis.nodes)
    V = basis.vander
    T = np.einsum("q,qk,qi,qj->kij", basis.weights * cz, V, V, V, optimize=True)
    if deg is None:
        mask = np.ones_like(T, dtype=bool)
    else:
        mask = selection_mask(basis.K, deg)
        leak = np.abs(T[~mask]).max(initial=0.0)
        if leak >= MASK_TOL:
            raise BasisError(f"selection-rule mask disagrees with quadrature ({leak:.2e})")
        T[~mask] = 0.0
    return T, mask


def project_coeffs(samples, basis):
    """Galerkin projection of nodal samples (node axis first)."""
    samples = np.asarray(samples)
    if samples.shape[0] != basis.Q:
        raise BasisError(f"expected {basis.Q} samples, got {samples.shape[0]}")
    return np.tensordot(basis.vander.T * basis.weights, samples, axes=(1, 0))
