"""Scenario drivers: each returns (rows per CSV, summary, passed flag)."""
from __future__ import annotations

import logging

import numpy as np

from ..gpc_basis import (gram, make_basis, pair_tensor, selection_mask, triple_tensor,
                         weight_matrix)
from ..gpc_sg import (assemble_sg, collocation_reference, evolve_dense, evolve_sg,
                      gauss_nodes, gpc_error_curve)
from ..spectral import CouplingError, branch_track, coupled_gap_estimate, gap_certify
from ..velocity_ops.cache import KernelCache
from ..velocity_ops.gamma import gamma_eval
from ..velocity_ops.grid import build_grid
from ..velocity_ops.operator import (assemble_L, gap_estimate, macro_basis, macro_project,
                                     model_hash, null_defect, raw_operator_rows,
                                     self_adjoint_defect)
from ..velocity_ops.direct import SmoothFields, apply_direct, apply_kernel
from ..whole_space import (InitialData, RadialGrid, decay_fit, default_times, evolve,
                           macro_data, micro_data, moment_drift, physical_norms,
                           plancherel_l2, small_radial_grid, x_space_l2)
from .config import make_grid, make_model

log = logging.getLogger(__name__)


def _cache(cfg):
    d = cfg["experiment"]["cache_dir"]
    return KernelCache(d) if d else None


# ----------------------------------------------------------------- spectrum

def run_spectrum(cfg):
    sp = cfg["experiment"]["spectrum"]
    grid = make_grid(cfg)
    model = make_model(cfg)
    op = assemble_L(grid, model, cache=_cache(cfg))
    etas = np.linspace(sp["eta_min"], sp["eta_max"], int(sp["n_eta"]))
    fits = branch_track(op, etas)
    cert = gap_certify(op, sp["gap_delta"], sp["gap_eta_max"], int(sp["gap_samples"]))
    nu1 = gap_estimate(op)
    spec_rows = [(float(e), f.j, float(s.real), float(s.imag))
                 for f in fits if f.available for e, s in zip(f.etas, f.sigma)]
    fit_rows = [(f.j, f.a, f.A, f.residual, int(f.available)) for f in fits]
    gap_rows = [(float(e), float(v)) for e, v in zip(cert.etas, cert.max_re)]
    summary = {"a0": fits[0].a, "a1": fits[1].a, "a2": fits[2].a,
               "A": [f.A for f in fits[:3]], "tau": cert.tau, "nu1_est": nu1,
               "eta0_nonfluid_max": cert.eta0_nonfluid_max,
               "max_re_all": cert.max_re_all, "raw_defect": op.raw_defect,
               "gap_note": cert.note}
    tables = {
        "spectrum.csv": (["eta", "branch", "re_sigma", "im_sigma"], spec_rows, 2),
        "fits.csv": (["branch", "a", "A", "residual", "available"], fit_rows, 1),
        "gap.csv": (["eta", "max_re_nonfluid"], gap_rows, 1),
    }
    return tables, summary, True


# -------------------------------------------------------------------- decay

def run_decay(cfg, init=None, orders=None):
    dc = cfg["experiment"]["decay"]
    init = init or dc["init"]
    orders = sorted(int(o) for o in (orders if orders is not None else dc["orders"]))
    grid = make_grid(cfg, dc["resolution"])
    model = make_model(cfg)
    n_ord = max(orders) + 1
    times = default_times(dc["t_max"], int(dc["n_times"]), dc["t_min"])
    nz = int(dc["z_nodes"])
    zs = [0.0] if nz == 1 else [float(z) * model.c_z
                               for z in gauss_nodes(cfg["basis"]["family"], nz)[0]]
    data = (macro_data if init == "macro" else micro_data)(grid, n_ord)
    window = tuple(dc["fit_window"])
    norm_rows, fit_rows = [], []
    summary = {"init": init, "fits": []}
    cache = _cache(cfg)
    for iz, z in enumerate(zs):
        ops = [assemble_L(grid, model, z, k, cache=cache) for k in range(n_ord)]
        tr = evolve(ops, data, times)
        pn = physical_norms(tr, orders=orders)
        for a, s in enumerate(orders):
            for it, t in enumerate(times):
                norm_rows.append((float(t), s, float(pn.L2[a, it]), float(pn.Linf[a, it]), iz))
            for kind, vals in (("L2x", pn.L2[a]), ("Linfx", pn.Linf[a])):
                f = decay_fit(times, vals, window, log_corrected=s >= 2, k=max(s, 1))
                fit_rows.append((s, kind, f.p, f.residual, f"{window[0]:g}-{window[1]:g}", iz))
                entry = {"order": s, "norm": kind, "exponent": f.p, "z": z,
                         "residual": f.residual}
                if f.log_corrected:
                    entry["log_corrected_ratio"] = f.growth_ratio
                    entry["bounded"] = f.bounded
                summary["fits"].append(entry)
    tables = {
        "decay.csv": (["t", "order", "norm_L2x", "norm_Linfx", "z_node_index"], norm_rows, 1),
        "decay_fits.csv": (["order", "norm_kind", "exponent", "residual", "window",
                            "z_node_index"], fit_rows, 2),
    }
    return tables, summary, True


# -------------------------------------------------------------- gap-certify

def run_gap_certify(cfg):
    gc = cfg["experiment"]["gap_certify"]
    grid = make_grid(cfg)
    base = make_model(cfg, "proportional")
    op = assemble_L(grid, base.__class__("proportional", 0.0), cache=_cache(cfg))
    nu1 = gap_estimate(op)
    rows = []
    summary = {"nu1_est": nu1, "rejected": []}
    for m in gc["m_values"]:
        for gamma in gc["gammas"]:
            for K in gc["Ks"]:
                model = base.__class__("proportional", float(gamma))
                _, B = pair_tensor(make_basis(cfg["basis"]["family"], int(K)), model)
                W = weight_matrix(int(K), float(m))
                try:
                    res = coupled_gap_estimate(B, W, op, gamma=float(gamma), m=float(m),
                                               nu1=nu1)
                    rows.append((float(m), float(gamma), int(K), res.bound, res.rayleigh_max))
                except CouplingError as e:
                    rows.append((float(m), float(gamma), int(K), float("nan"), float("nan")))
                    summary["rejected"].append({"m": m, "gamma": gamma, "K": K,
                                                "reason": str(e)})
    tables = {"gap_certificate.csv": (["m", "gamma", "K", "bound", "rayleigh_check"], rows, 3)}
    return tables, summary, True


# ------------------------------------------------------------- gpc-converge

def gpc_data(kind, h0):
    if kind == "analytic":
        return lambda z: h0 * np.exp(0.5 * z)
    if kind == "c2":
        return lambda z: h0 * abs(z) ** 2.5
    return lambda z: h0.copy()


def run_gpc_converge(cfg):
    gc = cfg["experiment"]["gpc_converge"]
    grid = make_grid(cfg, gc["resolution"])
    model = make_model(cfg, "proportional")
    op = assemble_L(grid, model, cache=_cache(cfg))
    h0 = macro_data(grid).h[0]
    rg = small_radial_grid(gc["r_max"], int(gc["n_r"]))
    times = np.asarray(gc["times"], dtype=float)
    ref = collocation_reference(model, grid, gpc_data(gc["data"], h0), int(gc["ref_nodes"]),
                                times, rg, k_max=max(gc["Ks"]),
                                family=cfg["basis"]["family"])
    curve = gpc_error_curve(gc["Ks"], ref, op)
    rows = list(curve.rows())
    summary = {"data": gc["data"], "reference": curve.reference,
               "spectral_residual": curve.spectral_residual,
               "algebraic_residual": curve.algebraic_residual,
               "loglog_slope": curve.loglog_slope}
    tables = {"convergence.csv": (["K", "t", "err_L2x", "err_Linfx", "proj_err", "num_err"],
                                  rows, 2)}
    return tables, summary, True


# ----------------------------------------------------------------- validate

def validation_checks(cfg):
    """Quick invariant suite; returns rows (check, value, tolerance, passed)."""
    vc = cfg["experiment"]["validate"]
    rng = np.random.default_rng(int(vc["seed"]))
    grid = make_grid(cfg, vc["resolution"])
    model = make_model(cfg, "proportional")
    op = assemble_L(grid, model)
    mb = macro_basis(grid)
    rows = []

    def add(name, value, tol, ok=None):
        rows.append((name, float(value), float(tol), bool(value <= tol if ok is None else ok)))

    f, g = rng.standard_normal((2, grid.N)) * grid.sqrtM
    add("self_adjointness", self_adjoint_defect(op, f, g), 1e-10)
    add("null_space", null_defect(grid, op.matrix), 1e-4)
    F = rng.standard_normal((20, grid.N)) * grid.sqrtM
    q = np.max(np.sum(grid.weights * op.apply(F) * F, axis=1) / np.sum(grid.weights * F * F, axis=1))
    add("dissipativity", q, 1e-10)
    p = macro_project(macro_project(f, mb, "P1"), mb, "P0")
    add("P0_P1_complementary", grid.norm(p), 1e-8)
    # Gamma conservation on a coarse full3d grid
    n = int(vc["gamma_resolution"])
    g3 = build_grid("full3d", grid.xi_max, n, grid.beta, tol_grid=1e-2)
    mb3 = macro_basis(g3)
    H = macro_project(SmoothFields(2, seed=int(vc["seed"]))(g3.nodes).T, mb3, "P1")
    G = gamma_eval(H[0], H[1], g3, model)
    ratio = g3.norm(macro_project(G, mb3)) / g3.norm(G)
    add("P0_Gamma_ratio_coarse", ratio, 0.2)
    basis = make_basis(cfg["basis"]["family"], 6)
    T, _ = triple_tensor(basis, model)
    sym = max(np.abs(T - T.transpose(0, 2, 1)).max(), np.abs(T - T.transpose(1, 0, 2)).max())
    add("chaos_tensor_symmetry", sym, 1e-12)
    V = basis.vander
    raw = np.einsum("q,qk,qi,qj->kij", basis.weights * (1 + model.b1 * basis.nodes), V, V, V)
    leak = np.abs(raw[~selection_mask(6, 1)]).max(initial=0.0)
    add("chaos_selection_rule", leak, 1e-12)
    add("basis_orthonormality", np.abs(gram(basis) - np.eye(6)).max(), 1e-12)
    # kernel formulas versus direct 5D quadrature of the collision integral
    sf = SmoothFields(1, seed=1)
    pts = np.array([[0.3, 0.0, 0.5], [1.2, 0.0, -0.7], [0.1, 0.0, 2.0]])
    Ld = apply_direct(pts, sf)[:, 0]
    Lk = apply_kernel(pts, sf)[:, 0]
    add("grad_vs_quadrature", np.max(np.abs(Lk - Ld)) / np.max(np.abs(Ld)), 1e-3)
    # semigroup law: restart from the state at t=3 and compare at t=5
    rg = RadialGrid(np.array([0.0, 0.3, 1.2]), np.ones(3), 2.0, np.array([0.0, 2.0]))
    flat = lambda r: np.ones_like(np.asarray(r, dtype=float))
    h = InitialData((mb.vectors[0] + 0.2 * F[0])[None], "macro", flat)
    t1 = evolve([op], h, np.array([0.0, 3.0, 5.0]), rg)
    errs = []
    for q_ in range(3):
        sub = RadialGrid(rg.r[q_:q_ + 1], rg.w[q_:q_ + 1], 2.0, rg.panels)
        mid = t1.profiles[0, 1, q_]
        parts = [evolve([op], InitialData(part[None], "macro", flat), np.array([0.0, 2.0]), sub)
                 .profiles[0, 1, 0] for part in (mid.real, mid.imag)]
        val = parts[0] + 1j * parts[1]
        end = t1.profiles[0, 2, q_]
        errs.append(np.abs(val - end).max() / np.abs(end).max())
    add("semigroup_law", max(errs), 1e-9)
    add("zero_wavenumber_moments", moment_drift(t1, 0, 0), 1e-8)
    # Plancherel versus direct x-space L2
    rgp = small_radial_grid(8.0, 160)
    tr = evolve([op], InitialData(mb.vectors[0][None]), np.array([0.0, 2.0]), rgp)
    x = np.linspace(0.0, 25.0, 5001)
    direct = x_space_l2(tr, 0, 1, x)
    planch = plancherel_l2(rgp, tr.profiles[0, 1])
    big = planch > 1e-6 * planch.max()
    add("plancherel_consistency", np.max(np.abs(direct - planch)[big] / planch[big]), 1e-2)
    # decoupling versus the dense block matrix
    gs = build_grid("axisym2d", grid.xi_max, (12, 8), grid.beta, tol_grid=1e-3)
    ops_ = assemble_L(gs, model)
    b3 = make_basis(cfg["basis"]["family"], 3)
    sg = assemble_sg(ops_, b3, model)
    H3 = rng.standard_normal((3, gs.N)) * gs.sqrtM
    tt = np.array([0.0, 0.7, 4.0])
    r = 0.45
    rgs = RadialGrid(np.array([r]), np.ones(1), 1.0, np.array([0.0, 1.0]))
    dec = evolve_sg(sg, H3, tt, rgs, norms=False, phi=lambda rr: np.ones_like(rr))
    den = evolve_dense(sg, H3, tt, r)
    add("decoupling_vs_block", np.abs(dec.profiles[:, :, 0, :].transpose(1, 0, 2) - den).max()
        / np.abs(den).max(), 1e-8)
    return rows


def run_validate(cfg):
    rows = validation_checks(cfg)
    ok = all(r[3] for r in rows)
    summary = {"passed": ok, "failed": [r[0] for r in rows if not r[3]]}
    return {"validate.csv": (["check", "value", "tolerance", "passed"], rows, 1)}, summary, ok


RUNNERS = {"spectrum": run_spectrum, "decay": run_decay, "gap-certify": run_gap_certify,
           "gpc-converge": run_gpc_converge, "validate": run_validate}


# -------------------------------------------------------------------- cache

def cache_keys(cfg):
    grid = make_grid(cfg)
    model = make_model(cfg)
    return grid, model, [(0.0, k) for k in range(model.alpha + 1)]


def cache_build(cfg, nphi=48):
    cache = _cache(cfg)
    grid, model, keys = cache_keys(cfg)
    built = []
    for z, k in keys:
        assemble_L(grid, model, z, k, nphi, cache=cache)
        built.append(str(cache.path(grid.hash64(), model_hash(model, z, k, nphi))))
    return built


def cache_verify(cfg, nphi=48, n_rows=8, tol=1e-12, seed=0):
    """Recompute random rows of every configured entry; returns (ok, report)."""
    from ..velocity_ops.cache import read_matrix
    cache = _cache(cfg)
    grid, model, keys = cache_keys(cfg)
    rng = np.random.default_rng(seed)
    report = []
    ok = True
    for p in cache.entries():
        read_matrix(p)                       # raises CacheCorrupt on a bad header or length
    for z, k in keys:
        mh = model_hash(model, z, k, nphi)
        p = cache.path(grid.hash64(), mh)
        if not p.exists():
            report.append((p.name, "missing"))
            ok = False
            continue
        K = read_matrix(p, grid.hash64(), mh)
        rows = rng.choice(grid.N, min(n_rows, grid.N), replace=False)
        fresh = raw_operator_rows(grid, model, z, k, rows, nphi)
        scale = max(np.abs(fresh).max(), 1e-300)
        err = float(np.abs(K[rows] - fresh).max() / scale) if np.any(fresh) else float(np.abs(K[rows]).max())
        good = err <= tol
        ok &= good
        report.append((p.name, f"max rel row error {err:.2e} ({'ok' if good else 'MISMATCH'})"))
    return ok, report


def cache_purge(cfg):
    return _cache(cfg).purge()
