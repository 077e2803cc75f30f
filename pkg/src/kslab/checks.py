"""Verification suites behind the ``check`` subcommand.

Each suite measures the defining residuals of one subsystem and gates them
at the library's published tolerances.  Suites return (rows, passed); rows
are CSV-ready dicts with columns (check, value, gate, passed).
"""

from __future__ import annotations

import numpy as np

from . import diagnostics, greens, solver, testfn, weakform
from .geometry import unit_disk

__all__ = ["check_greens", "check_testfn", "check_sobolev", "check_weak_residual", "CHECK_COLUMNS"]

CHECK_COLUMNS = ["check", "value", "gate", "passed"]


def _row(name: str, value: float, gate: float, larger_ok: bool = False) -> dict:
    ok = value >= gate if larger_ok else value <= gate
    return {"check": name, "value": value, "gate": gate, "passed": bool(ok)}


def _sample_disk(rng, n, r_max=0.999):
    r = np.sqrt(rng.uniform(0, r_max**2, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def check_greens(mesh: float = 1.0 / 512.0, n_pairs: int = 1000, seed: int = 11) -> tuple[list, bool]:
    rng = np.random.default_rng(seed)
    rows = []

    xs = _sample_disk(rng, 200)
    ys = _sample_disk(rng, 200)
    keep = np.hypot(*(xs - ys).T) > 1e-3
    sym = np.abs(
        np.asarray(greens.greens_disk_exact(xs[keep], ys[keep]))
        - np.asarray(greens.greens_disk_exact(ys[keep], xs[keep]))
    ).max()
    rows.append(_row("symmetry", float(sym), 1e-12))

    mz = max(abs(greens.disk_mean_of_greens(x)) for x in _sample_disk(rng, 20, 0.95))
    rows.append(_row("mean_zero", float(mz), 1e-8))

    # Neumann: 4th-order one-sided inward stencil at 64 boundary points
    worst = 0.0
    for th in 2 * np.pi * np.arange(64) / 64:
        b = np.array([np.cos(th), np.sin(th)])
        src = _sample_disk(rng, 1, 0.6)[0]
        f = [greens.greens_disk_exact(b - k * mesh * b, src) for k in range(5)]
        d = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * mesh)
        worst = max(worst, abs(d))
    rows.append(_row("neumann_residual", worst, 1e-6))

    # gradient decomposition vs central finite differences on collar pairs
    decomp = greens.build_greens_decomposition()
    worst = 0.0
    count = 0
    while count < n_pairs:
        pts = _sample_disk(rng, 2 * n_pairs, 0.998)
        d = 1.0 - np.hypot(pts[:, 0], pts[:, 1])
        collar = pts[(d < 2 * decomp.sigma0) & (d > 2e-3)]
        for k in range(0, len(collar) - 1, 2):
            x, y = collar[k], collar[k + 1]
            sep = np.hypot(*(x - y))
            tau = greens.reflect_tau(decomp.domain, y)
            sep_t = np.hypot(*(x - tau))
            if sep < 5e-3:
                continue
            h = min(3e-3 * min(sep, sep_t), 0.3 * (1.0 - np.hypot(*x)))
            if h < 1e-9:
                continue
            fd = np.array(
                [
                    (
                        greens.greens_disk_exact(x + h * e, y)
                        - greens.greens_disk_exact(x - h * e, y)
                    )
                    / (2 * h)
                    for e in (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
                ]
            )
            terms = greens.grad_x_G_terms(decomp, x, y)
            worst = max(worst, float(np.max(np.abs(terms.total - fd))))
            count += 1
            if count >= n_pairs:
                break
    rows.append(_row("grad_decomposition_fd", worst, 1e-4))

    # amplitude scan stability under sampling-mesh doubling: sample points
    # refine while the probe partners stay fixed, so the maxima converge
    pr = np.linspace(0.05, 0.97, 8)
    pt = 2 * np.pi * np.arange(8) / 8
    prr, ptt = np.meshgrid(pr, pt, indexing="ij")
    probes = np.stack([prr * np.cos(ptt), prr * np.sin(ptt)], axis=-1).reshape(-1, 2)

    def scan(n_r, n_t):
        r = np.linspace(0.02, 0.99, n_r)
        th = 2 * np.pi * np.arange(n_t) / n_t
        rr, tt = np.meshgrid(r, th, indexing="ij")
        pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        kmax = gkmax = wmax = 0.0
        for p in probes:
            b = np.broadcast_to(p, pts.shape)
            ok = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]) > 1e-2
            a = pts[ok]
            bb = b[ok]
            kmax = max(kmax, float(np.max(np.abs(greens.remainder_k_exact(decomp, bb, a)))))
            gkmax = max(gkmax, float(np.max(np.abs(greens.grad_x_remainder_k_exact(decomp, bb, a)))))
            wmax = max(wmax, float(np.max(np.abs(greens.grad_x_G_terms(decomp, a, bb).w_remainder))))
        return kmax, gkmax, wmax

    k1, g1, w1 = scan(40, 48)
    k2, g2, w2 = scan(80, 96)
    for name, v1, v2 in (("K_max_stability", k1, k2), ("gradK_max_stability", g1, g2), ("W_max_stability", w1, w2)):
        ratio = abs(v2 / v1 - 1.0) if v1 else 0.0
        rows.append(_row(name, ratio, 0.10))
        rows.append({"check": name + "_value", "value": v2, "gate": "", "passed": True})

    passed = all(r["passed"] for r in rows)
    return rows, passed


def check_testfn(rhos=(0.02,), lambda0: float = 8.0, mesh: float = 1.0 / 512.0) -> tuple[list, bool]:
    rows = []
    tiny = 1e-9
    for b in (1.0, testfn.PHI_LOG_KNEE, testfn.PHI_SUPPORT):
        mismatch = abs(testfn.phi_deriv(b - tiny) - testfn.phi_deriv(b + tiny))
        # one-sided slopes agree to O(tiny); the analytic mismatch is zero
        rows.append(_row(f"phi_c1_breakpoint_{b:.4f}", float(mismatch), 1e-8))
    dom = unit_disk()
    for rho in rhos:
        for depth in (0.0, 1.0, 2.0):
            rr = rho if depth < 2 else rho / 2
            x0 = np.array([1.0 - depth * rr, 0.0])
            bump = testfn.build_boundary_bump(dom, x0, rr, lambda0)
            rep = testfn.verify_bump(bump, mesh=mesh, n_samples=600)
            tag = f"rho{rr}_depth{depth}"
            rows.append(_row(f"bump_core_lap_{tag}", rep.core_laplacian_rel_err, 0.05))
            rows.append(_row(f"bump_neumann_{tag}", rep.neumann_residual, 1e-6))
            rows.append(_row(f"bump_min_core_{tag}", rep.min_on_core, 0.5, larger_ok=True))
            rows.append(_row(f"bump_support_{tag}", rep.support_leak, 0.0))
            rows.append(_row(f"bump_annulus_sign_{tag}", rep.annulus_min_laplacian, -0.12, larger_ok=True))
    passed = all(r["passed"] for r in rows)
    if not passed:
        admissible = testfn.max_admissible_rho(dom, 0.0, 1.0, lambda0)
        rows.append({"check": "max_admissible_rho", "value": admissible, "gate": "", "passed": True})
    return rows, passed


def check_sobolev(n_fields: int = 100, seed: int = 20240) -> tuple[list, bool]:
    rows = []
    rng = np.random.default_rng(seed)
    eta = diagnostics._sobolev_eta(96, 1.0)
    fails = 0
    for _ in range(n_fields):
        u = diagnostics.random_band_limited_field(96, 1.0, rng)
        _, _, ok = diagnostics.sobolev_check(u, eta, 0.5)
        fails += 0 if ok else 1
    rows.append(_row("regression_failures", fails, 0))
    # near-extremal probe: concentrated polynomial bump inside eta == 1
    hx = 1.0 / 192
    x = (np.arange(192) + 0.5) * hx
    X, Y = np.meshgrid(x, x, indexing="ij")
    eta2 = diagnostics._sobolev_eta(192, 1.0)
    worst_ratio = 0.0
    for R in (0.12, 0.08, 0.05):
        r2 = ((X - 0.5) ** 2 + (Y - 0.5) ** 2) / R**2
        u = solver.Field(hx, hx, np.maximum(1 - r2, 0.0) ** 5)
        lhs, t1, _ = diagnostics.sobolev_check(u, eta2, 0.5, C=0.0)
        worst_ratio = max(worst_ratio, lhs / t1)
    rows.append(_row("near_extremal_ratio", worst_ratio, 1.0))
    return rows, all(r["passed"] for r in rows)


def check_weak_residual(levels=(64, 128, 256), t_end: float = 0.01, n_theta: int = 160) -> tuple[list, bool]:
    rows = []
    residuals = []
    for n in levels:
        grid = solver.make_radial_grid(n, 1.0)
        u0 = solver.initial_condition_radial(grid, "gaussian", mass=4.0, width=0.25)
        cfg = solver.SolverConfig(backend="radial", t_end=t_end, snapshot_dt=t_end / 24)
        traj = solver.radial_run(cfg, solver.RegKind("cutoff_flux", 1e-2), u0)
        test = weakform.interior_bump_test(radius=0.45, t_hold=0.3 * t_end, t_off=0.8 * t_end)
        qb = weakform.weak_residual(traj, test, n_theta=n_theta)
        residuals.append(abs(qb.residual))
        rows.append({"check": f"residual_n{n}", "value": abs(qb.residual), "gate": "", "passed": True})
        rows.append(_row(f"collar_terms_zero_n{n}", abs(qb.Q2) + abs(qb.Q3) + abs(qb.Q4), 0.0))
    orders = [np.log2(residuals[k] / residuals[k + 1]) for k in range(len(residuals) - 1)]
    for k, o in enumerate(orders):
        rows.append(_row(f"order_{levels[k]}to{levels[k + 1]}", float(o), 0.8, larger_ok=True))
    return rows, all(r["passed"] for r in rows)
