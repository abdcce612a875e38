import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bkuq.velocity_ops import (CollisionModel, GammaError, GridError, KernelCache, ModelError,
                               OperatorError, CacheCorrupt, assemble_L, build_grid,
                               collision_frequency, gamma_eval, gap_estimate, macro_basis,
                               macro_project, maxwellian_mass, mean_relative_speed,
                               null_defect, raw_operator_rows, sampled_gap,
                               self_adjoint_defect)
from bkuq.velocity_ops.cache import read_matrix
from bkuq.velocity_ops.direct import SmoothFields, apply_direct, apply_kernel

PROP = CollisionModel("proportional", b1=0.3)


@pytest.fixture(scope="module")
def g16():
    return build_grid("axisym2d", 6.0, (16, 8), tol_grid=1e-3)


@pytest.fixture(scope="module")
def L16(g16):
    return assemble_L(g16, PROP)


# ------------------------------------------------------------------- grid

def test_default_grid():
    g = build_grid("axisym2d", 6.0, (40, 20), 2.0)
    assert g.N == 800
    assert abs(maxwellian_mass(g) - 1) < 1e-6


def test_full3d_count():
    assert build_grid("full3d", 6.0, 12, 2.0, tol_grid=1e-2).N == 1728


def test_grid_guards():
    with pytest.raises(GridError, match="beta must exceed 3/2"):
        build_grid("axisym2d", 6.0, (40, 20), 1.0)
    with pytest.raises(GridError, match="xi_max"):
        build_grid("axisym2d", 4.0, (40, 20))
    with pytest.raises(GridError, match="too coarse"):
        build_grid("axisym2d", 6.0, (8, 8), tol_grid=1e-12)


def test_macro_basis_orthonormal(g16):
    mb = macro_basis(g16)
    assert np.allclose(mb.gram(), np.eye(3), atol=1e-12)
    assert mb.labels == ("chi0", "chi3", "chi4")
    # (chi_0, sqrt M) = int M dxi on the grid
    assert np.sum(g16.weights * mb.vectors[0] * g16.sqrtM) == pytest.approx(1.0, abs=1e-3)


def test_macro_basis_default_grid_moment():
    g = build_grid("axisym2d", 6.0, (40, 20))
    mb = macro_basis(g)
    assert np.sum(g.weights * mb.vectors[0] * g.sqrtM) == pytest.approx(1.0, abs=1e-6)
    assert abs(g.inner(mb.vectors[0], mb.vectors[2])) < 1e-8


def test_projections(g16):
    mb = macro_basis(g16)
    assert np.allclose(macro_project(mb.vectors[1], mb, "P0"), mb.vectors[1], atol=1e-12)
    assert g16.norm(macro_project(mb.vectors[0], mb, "P1")) < 1e-8
    with pytest.raises(ValueError):
        macro_project(mb.vectors[0], mb, "P2")


# -------------------------------------------------------------- collision

def test_collision_frequency_at_rest():
    # pi * E|xi_*| for a standard 3D Gaussian, E|X| = sqrt(8/pi)
    assert collision_frequency(0.0) == pytest.approx(math.pi * math.sqrt(8 / math.pi), rel=1e-6)
    assert collision_frequency(0.0) == pytest.approx(5.0133, abs=1e-4)


@pytest.mark.parametrize("s", [0.3, 1.0, 2.5, 5.0])
def test_mean_relative_speed_against_quadrature(s):
    # E|xi - X| = int_0^inf int_{-1}^{1} sqrt(s^2 + r^2 - 2 s r c) r^2 e^{-r^2/2} / (2pi)^{3/2} 2pi
    f = lambda c, r: (np.sqrt(s * s + r * r - 2 * s * r * c) * r * r * np.exp(-r * r / 2)
                      * 2 * np.pi / (2 * np.pi) ** 1.5)
    val, _ = integrate.dblquad(f, 0, 12, -1, 1, epsabs=1e-11)
    assert mean_relative_speed(s) == pytest.approx(val, rel=1e-8)


def test_model_guards():
    with pytest.raises(ModelError):
        CollisionModel("maxwell")
    with pytest.raises(ModelError, match="not positive"):
        CollisionModel("proportional", b1=1.5)
    with pytest.raises(ModelError, match="outside"):
        PROP.check_z(1.5)


# --------------------------------------------------------------- operator

def test_derivative_operators(g16, L16):
    L1 = assemble_L(g16, PROP, 0.0, 1)
    assert np.allclose(L1.matrix, 0.3 * L16.matrix, atol=1e-14)
    assert assemble_L(g16, PROP, 0.0, 2).is_zero
    with pytest.raises(OperatorError):
        assemble_L(g16, PROP, 0.0, 3)


def test_cubic_piece_is_half_of_unit_kernel(g16, L16):
    # for hard spheres L_{s^3} = L_{s}/2 on the continuum; check the assembled pieces
    cub = CollisionModel("cubic", eps=0.4)
    d = assemble_L(g16, cub, 0.0, 1)
    assert np.abs(d.matrix - 0.2 * L16.matrix).max() < 2e-2 * np.abs(L16.matrix).max()


def test_operator_structure(g16, L16):
    rng = np.random.default_rng(0)
    f, g = rng.standard_normal((2, g16.N)) * g16.sqrtM
    assert self_adjoint_defect(L16, f, g) < 1e-12
    assert null_defect(g16, L16.matrix) < 1e-12
    S = L16.symmetric()
    assert np.allclose(S, S.T, atol=1e-12)
    assert np.linalg.eigvalsh(0.5 * (S + S.T)).max() < 1e-10


def test_gap_estimate_frozen():
    g = build_grid("axisym2d", 6.0, (40, 20))
    nu1 = gap_estimate(assemble_L(g, CollisionModel("proportional")))
    assert nu1 == pytest.approx(3.362, abs=5e-3)


def test_sampled_gap_bounds_exact(g16, L16):
    F = SmoothFields(6, seed=3)(g16.points3d()).T
    assert sampled_gap(L16, F) >= gap_estimate(L16) - 1e-10


def test_raw_rows_match_assembly(g16):
    rows = np.array([0, 17, 60])
    K = raw_operator_rows(g16, PROP, 0.0, 0, rows)
    L = assemble_L(g16, PROP, conservative=False)
    assert np.allclose(K, L.K[rows], atol=1e-14, rtol=0)


@pytest.mark.parametrize("q", [1, 3])
def test_kernel_formula_vs_direct_quadrature(q):
    sf = SmoothFields(1, seed=1)
    pts = np.array([[0.3, 0.0, 0.5], [1.2, 0.0, -0.7]])
    Ld = apply_direct(pts, sf, q=q)[:, 0]
    Lk = apply_kernel(pts, sf, q=q)[:, 0]
    assert np.max(np.abs(Lk - Ld)) / np.max(np.abs(Ld)) < 1e-3


def test_nodal_operator_vs_direct_quadrature():
    g = build_grid("axisym2d", 6.0, (40, 20))
    L = assemble_L(g, CollisionModel("proportional"))
    sf = SmoothFields(1, seed=2)
    fn = sf(g.points3d())[:, 0]
    idx = np.array([g.N // 2 + 3, g.N // 3 + 1])
    Lk = apply_kernel(g.points3d()[idx], sf)[:, 0]
    assert np.max(np.abs((L.matrix @ fn)[idx] - Lk)) / np.max(np.abs(Lk)) < 2e-2


# ------------------------------------------------------------------ cache

def test_cache_round_trip_and_keying(tmp_path, g16):
    cache = KernelCache(tmp_path)
    a = assemble_L(g16, PROP, cache=cache)
    assert len(cache.entries()) == 1
    b = assemble_L(g16, PROP, cache=cache)
    assert np.array_equal(a.matrix, b.matrix)
    assemble_L(build_grid("axisym2d", 6.0, (16, 10), tol_grid=1e-3), PROP, cache=cache)
    assert len(cache.entries()) == 2
    p = cache.entries()[0]
    p.write_bytes(p.read_bytes()[:-16])
    with pytest.raises(CacheCorrupt):
        read_matrix(p)
    assert cache.purge() == 2 and not cache.entries()


# ------------------------------------------------------------------ gamma

@pytest.fixture(scope="module")
def g8():
    return build_grid("full3d", 6.0, 8, tol_grid=1e-2)


def test_gamma_zero_and_guards(g8, g16):
    f = SmoothFields(1)(g8.nodes)[:, 0]
    assert np.all(gamma_eval(np.zeros(g8.N), f, g8, PROP) == 0)
    with pytest.raises(GammaError, match="full3d"):
        gamma_eval(np.zeros(g16.N), np.zeros(g16.N), g16, PROP)
    with pytest.raises(GammaError, match="ceiling"):
        gamma_eval(f, f, g8, PROP, ceiling=100)


def test_gamma_symmetric_and_bilinear(g8):
    F = SmoothFields(3, seed=4)(g8.nodes).T
    a = gamma_eval(F[0], F[1], g8, PROP)
    assert np.allclose(a, gamma_eval(F[1], F[0], g8, PROP), atol=1e-12)
    lin = gamma_eval(F[0] + 2 * F[2], F[1], g8, PROP)
    assert np.allclose(lin, a + 2 * gamma_eval(F[2], F[1], g8, PROP), atol=1e-10)


def test_gamma_equilibrium_direction_refines(g8):
    # Gamma(sqrt M, sqrt M) vanishes in the continuum; on the grid it is pure
    # quadrature error and shrinks under refinement
    vals = []
    for g in (g8, build_grid("full3d", 6.0, 10, tol_grid=1e-2)):
        h = macro_basis(g).vectors[0]
        vals.append(g.norm(gamma_eval(h, h, g, PROP)))
    assert vals[1] < 0.8 * vals[0]


# ------------------------------------------------------------- properties

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), mu=st.floats(0.2, 3.0))
def test_dissipativity_property(g16, L16, seed, mu):
    f = np.random.default_rng(seed).standard_normal(g16.N) * g16.sqrtM
    op = L16.scaled(mu)
    val = np.sum(g16.weights * op.apply(f) * f)
    p1 = macro_project(f, macro_basis(g16), "P1")
    assert val <= -mu * gap_estimate(L16) * g16.norm(p1) ** 2 + 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_projection_algebra_property(g16, seed):
    f = np.random.default_rng(seed).standard_normal(g16.N)
    mb = macro_basis(g16)
    p0 = macro_project(f, mb, "P0")
    p1 = macro_project(f, mb, "P1")
    assert np.allclose(p0 + p1, f)
    assert g16.norm(macro_project(p1, mb, "P0")) < 1e-8 * (1 + g16.norm(f))
    assert np.allclose(macro_project(p0, mb, "P0"), p0, atol=1e-10 * (1 + g16.norm(f)))
    assert abs(g16.inner(p0, p1)) < 1e-10 * (1 + g16.norm(f) ** 2)
