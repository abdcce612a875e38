"""Uncertain angular kernel families b(s, z), s = cos(theta)."""
from __future__ import annotations

from dataclasses import dataclass
import hashlib
import math

import numpy as np
from scipy.special import erf

FAMILIES = ("proportional", "cubic")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class CollisionModel:
    """b(s, z) = sum_p c_p(z) s^q_p.

    proportional: b = (1 + z b1) s
    cubic:        b = s + z eps s^3
    """
    family: str = "proportional"
    b1: float = 0.0
    eps: float = 0.0
    c_z: float = 1.0
    alpha: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown kernel family {self.family!r}")
        if self.alpha < 0:
            raise ModelError("alpha must be nonnegative")
        lo = self.angular_mass_bounds()[0]
        if lo <= 0:
            raise ModelError(f"angular kernel not positive on |z| <= {self.c_z:g}: "
                             f"min int b sin(theta) dtheta = {lo:.4g}")

    def pieces(self):
        """List of (polynomial coefficients in z, low first; power q of s)."""
        if self.family == "proportional":
            return [(np.array([1.0, self.b1]), 1)]
        return [(np.array([1.0]), 1), (np.array([0.0, self.eps]), 3)]

    def z_poly(self):
        """z-factor c(z) when b(s, z) = c(z) s (proportional family only)."""
        if self.family != "proportional":
            raise ModelError("the kernel is not of the form c(z) s")
        return np.array([1.0, self.b1])

    def dz_pieces(self, z, k=0):
        """[(d^k c_p/dz^k at z, q_p)] for the derivative operator of order k."""
        P = np.polynomial.polynomial
        out = []
        for coef, q in self.pieces():
            d = P.polyder(coef, k) if k else coef
            out.append((float(P.polyval(z, d)) if len(d) else 0.0, q))
        return out

    def b(self, s, z, k=0):
        s = np.asarray(s, dtype=float)
        return sum(c * s ** q for c, q in self.dz_pieces(z, k))

    def angular_mass(self, z, k=0):
        """int_0^{pi/2} d^k b(cos theta, z) sin theta dtheta."""
        return sum(c / (q + 1) for c, q in self.dz_pieces(z, k))

    def angular_mass_bounds(self):
        zz = np.linspace(-self.c_z, self.c_z, 201)
        vals = [self.angular_mass(z) for z in zz]
        return float(min(vals)), float(max(vals))

    def derivative_bound(self):
        """sum_{k=1}^alpha max_{z,s} |d^k b|."""
        zz = np.linspace(-self.c_z, self.c_z, 41)
        ss = np.linspace(0, 1, 41)
        tot = 0.0
        for k in range(1, self.alpha + 1):
            tot += max(float(np.abs(self.b(ss, z, k)).max()) for z in zz)
        return tot

    def check_z(self, z):
        if abs(z) > self.c_z + 1e-12:
            raise ModelError(f"z = {z:g} outside the domain |z| <= {self.c_z:g}")

    def descriptor(self):
        return {"family": self.family, "b1": float(self.b1), "eps": float(self.eps),
                "c_z": float(self.c_z), "alpha": int(self.alpha)}

    def hash64(self, *extra):
        key = repr(sorted(self.descriptor().items())) + repr(extra)
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def mean_relative_speed(s):
    """E|xi - X| for X standard normal in 3D and |xi| = s."""
    s = np.maximum(np.asarray(s, dtype=float), 1e-8)
    return (math.sqrt(2 / math.pi) * np.exp(-s ** 2 / 2)
            + (s + 1 / s) * erf(s / math.sqrt(2)))


def collision_frequency(s, q=1):
    """nu_q(xi) = (2 pi / (q+1)) E|xi - X| for angular factor s^q."""
    return 2 * math.pi / (q + 1) * mean_relative_speed(s)
