import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bkuq.gpc_basis import make_basis, pair_tensor, weight_matrix
from bkuq.spectral import (CouplingError, GapCertificationError, SpectralError, assemble_symbol,
                           branch_track, coupled_gap_estimate, gap_certify)
from bkuq.velocity_ops import CollisionModel, assemble_L, build_grid, gap_estimate

UNIT = CollisionModel("proportional")


@pytest.fixture(scope="module")
def op():
    return assemble_L(build_grid("axisym2d", 6.0, (16, 8), tol_grid=1e-3), UNIT)


@pytest.fixture(scope="module")
def op24():
    return assemble_L(build_grid("axisym2d", 6.0, (24, 12), tol_grid=1e-3), UNIT)


def test_symbol_at_zero_is_operator(op):
    sm = assemble_symbol(op, 0.0)
    assert np.allclose(sm.nodal(), op.matrix, atol=1e-13)
    ev = sm.eigvals()
    assert np.abs(ev.imag).max() < 1e-10 and ev.real.max() < 1e-10
    ev2 = np.sort(assemble_symbol(op, 0.0, 2.0).eigvals().real)
    assert np.allclose(ev2, 2 * np.sort(ev.real), atol=1e-10)


def test_symbol_guards(op):
    with pytest.raises(SpectralError):
        assemble_symbol(op, 0.1, mu=0.0)
    with pytest.raises(TypeError):
        assemble_symbol(op.matrix, 0.1)


@settings(max_examples=15, deadline=None)
@given(eta=st.floats(0.0, 8.0), mu=st.floats(0.3, 2.0))
def test_symbol_dissipative_property(op, eta, mu):
    ev = assemble_symbol(op, eta, mu).eigvals()
    assert ev.real.max() < 1e-9
    # conjugation symmetry xi_z -> -xi_z maps the spectrum to its conjugate
    dist = np.abs(ev[:, None] - np.conj(ev)[None, :]).min(axis=1)
    assert dist.max() < 1e-7 * (1 + np.abs(ev).max())


def test_branch_fits_coarse_grid(op24):
    fits = branch_track(op24, np.linspace(0.02, 0.3, 29))
    a0 = np.sqrt(5 / 3)
    assert fits[0].a == pytest.approx(a0, rel=0.02)
    assert fits[1].a == pytest.approx(-fits[0].a, abs=1e-6)
    assert abs(fits[2].a) < 0.02
    assert all(f.A > 0 for f in fits[:3])
    assert not fits[3].available and not fits[4].available


def test_gap_certificate(op):
    cert = gap_certify(op, 0.3, 10.0, 60)
    assert cert.tau > 0
    assert cert.max_re_all < 1e-9
    assert cert.eta0_nonfluid_max <= -gap_estimate(op) + 1e-8
    with pytest.raises(SpectralError):
        gap_certify(op, n_samples=10)
    # shrinking delta below the fluid range leaves near-zero branches in the sweep
    with pytest.raises(GapCertificationError):
        gap_certify(op, delta=0.0, eta_max=10.0, n_samples=60)


def test_gap_with_sg_multipliers(op):
    gamma = 0.1
    single = gap_certify(op, 0.3, 10.0, 60)
    sg = gap_certify(op, 0.3, 10.0, 60, mus=(1 - 2 * gamma, 1.0, 1 + 2 * gamma))
    assert sg.tau >= (1 - 2 * gamma) * single.tau * (1 - 1e-6)


def test_coupled_gap_decoupled(op):
    nu1 = gap_estimate(op)
    _, B = pair_tensor(make_basis("legendre", 4), [1.0])
    res = coupled_gap_estimate(B, weight_matrix(4, 2.0), op)
    assert res.bound == pytest.approx(nu1, rel=1e-12)


def test_coupled_gap_guard(op):
    _, B = pair_tensor(make_basis("legendre", 4), [1.0, 0.25])
    with pytest.raises(CouplingError, match="0.2"):
        coupled_gap_estimate(B, weight_matrix(4, 2.0), op, gamma=0.25, m=2.0)
    # the guard is strict at the threshold
    with pytest.raises(CouplingError):
        coupled_gap_estimate(B, weight_matrix(4, 2.0), op, gamma=0.2, m=2.0)


def test_coupled_gap_positive_with_rayleigh(op):
    nu1 = gap_estimate(op)
    _, B = pair_tensor(make_basis("legendre", 6), [1.0, 0.1])
    res = coupled_gap_estimate(B, weight_matrix(6, 2.0), op, gamma=0.1, m=2.0, nu1=nu1)
    assert res.bound > 0
    assert res.bound >= 0.5 * (1 - 2 * 0.1) * nu1
    # random microscopic states dissipate at least at the certified rate
    assert res.rayleigh_max <= -res.bound + 1e-10
    assert res.exact_sup <= -res.bound + 1e-10
