import numpy as np
import pytest

from kslab import diagnostics as D
from kslab import solver as S


def test_entropy_constant_state():
    c, eps = 2.0, 1e-2
    grid = S.make_radial_grid(128, 1.0)
    u = S.RadialField(grid, np.full(128, c))
    v = S.RadialField(grid, np.zeros(128))
    E, Dv = D.entropy(u, v, eps)
    expect = np.pi * (c * np.log(c) - c + 6 * eps * c ** (7 / 6))
    assert E == pytest.approx(expect, rel=1e-12)
    assert Dv == pytest.approx(0.0, abs=1e-20)


def test_entropy_heat_flow_dissipation_identity():
    # at eps = 0 with no potential the semi-discrete identity dE/dt = -D
    # holds through the logarithmic-mean face weights
    u0 = S.initial_condition_rect(96, 96, 1.0, 1.0, "gaussian", mass=2.0, width=0.15)
    cfg = S.SolverConfig(backend="rect", t_end=5e-4, advection=False)
    traj = S.run(cfg, S.RegKind("nonlinear_diffusion", 0.0), u0)
    r = traj.diag
    k = len(r) // 2
    dEdt = (r[k + 1]["entropy"] - r[k - 1]["entropy"]) / (r[k + 1]["t"] - r[k - 1]["t"])
    assert dEdt == pytest.approx(-r[k]["dissipation"], rel=0.05)


def test_entropy_epsilon_bound_constant():
    grid = S.make_radial_grid(64, 1.0)
    u0 = S.RadialField(grid, np.full(64, 3.0))
    cfg = S.SolverConfig(backend="radial", t_end=1e-4)
    traj = S.radial_run(cfg, S.RegKind("nonlinear_diffusion", 1e-2), u0)
    got = D.entropy_epsilon_bound(traj, alpha_exp=0.1)
    expect = 1e-2 ** 1.1 * np.pi * 3.0 ** (7 / 6)
    assert got == pytest.approx(expect, rel=1e-6)


def test_entropy_epsilon_bound_wrong_reg():
    grid = S.make_radial_grid(64, 1.0)
    u0 = S.RadialField(grid, np.full(64, 1.0))
    traj = S.radial_run(S.SolverConfig(backend="radial", t_end=1e-4), S.RegKind("cutoff_flux", 1e-2), u0)
    with pytest.raises(ValueError):
        D.entropy_epsilon_bound(traj)


# --------------------------------------------------------------------------
# ball integrals
# --------------------------------------------------------------------------


def test_circle_rect_overlap_against_rasterization(rng):
    for _ in range(8):
        x0, y0 = rng.uniform(-1.5, 0.5, 2)
        dx, dy = rng.uniform(0.2, 1.2, 2)
        rho = rng.uniform(0.3, 1.2)
        exact = D.circle_rect_overlap(x0, x0 + dx, y0, y0 + dy, rho)
        n = 800
        xs = np.linspace(x0 + dx / (2 * n), x0 + dx - dx / (2 * n), n)
        ys = np.linspace(y0 + dy / (2 * n), y0 + dy - dy / (2 * n), n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        raster = float(np.mean(X**2 + Y**2 <= rho**2) * dx * dy)
        assert exact == pytest.approx(raster, abs=3e-3 * rho)


def test_ball_weights_rect_total_area():
    u = S.Field(1 / 64, 1 / 64, np.zeros((64, 64)))
    w = D.ball_weights_rect(u, (0.5, 0.5), 0.2)
    assert w.sum() == pytest.approx(np.pi * 0.04, rel=1e-12)


def test_ball_mass_radial_exact_partial_cells():
    grid = S.make_radial_grid(16, 1.0)
    u = S.RadialField(grid, np.ones(16))
    # rho cutting through the middle of a cell still integrates exactly
    for rho in (0.2, 0.23, 0.5):
        assert D.ball_mass_radial(u, rho) == pytest.approx(np.pi * rho**2, rel=1e-12)


def test_offcenter_ball_weights_radial():
    grid = S.make_radial_grid(512, 1.0)
    u = S.RadialField(grid, np.ones(512))
    w = D.offcenter_ball_weights_radial(grid, 0.3, 0.15)
    # per-cell Gauss quadrature; only the two kink cells carry O(dr^1.5) error
    assert float(np.sum(w)) == pytest.approx(np.pi * 0.15**2, rel=1e-4)


def test_constant_probe_lp():
    grid = S.make_radial_grid(256, 1.0)
    c = 1.7
    u0 = S.RadialField(grid, np.full(256, c))
    traj = S.radial_run(S.SolverConfig(backend="radial", t_end=1e-4), S.RegKind("cutoff_flux", 1e-2), u0)
    out = D.local_lp(traj, ((0.0, 0.0), 0.2), p=2.0)
    assert out["lp"][0] == pytest.approx(np.pi * 0.2**2 * c**2, rel=1e-9)


# --------------------------------------------------------------------------
# concentration detection and atoms
# --------------------------------------------------------------------------


def test_detect_nothing_on_small_constant():
    u = S.Field(1 / 64, 1 / 64, np.full((64, 64), 0.05))
    centers = D.detect_concentrations(u, D.M0_CUTOFF, 0.05)
    assert centers == []


def test_detect_single_peak_rect():
    u = S.initial_condition_rect(96, 96, 1.0, 1.0, "gaussian", mass=8.0, width=0.04, center=(0.45, 0.6))
    centers = D.detect_concentrations(u, D.M0_CUTOFF, 0.05)
    assert len(centers) == 1
    assert np.hypot(*(centers[0] - np.array([0.45, 0.6]))) <= 2 * 0.05


def test_detect_two_separated_peaks_and_count_bound():
    u = S.initial_condition_rect(
        96, 96, 1.0, 1.0, "two_bump", mass=10.0, center1=(0.3, 0.3), width1=0.03, center2=(0.7, 0.7), width2=0.03
    )
    m0 = D.M0_CUTOFF
    centers = D.detect_concentrations(u, m0, 0.05)
    assert len(centers) == 2
    assert len(centers) <= int(4 * u.mass() / m0)


def test_atom_estimate_no_atom_on_smooth():
    grid = S.make_radial_grid(256, 1.0)
    u = S.initial_condition_radial(grid, "gaussian", mass=4.0, width=0.4)
    est = D.atom_estimate(u, (0.0, 0.0), S.RegKind("cutoff_flux", 1e-2))
    assert est.no_atom  # alpha keeps growing along the ladder, no plateau


def test_atom_estimate_inequalities():
    grid = S.make_radial_grid(512, 1.0)
    # saturated narrow spike: f_eps(u) < u inside, so beta < alpha
    vals = np.where(grid.centers < 0.02, 5e4, 0.0)
    u = S.RadialField(grid, vals)
    est_c = D.atom_estimate(u, (0.0, 0.0), S.RegKind("cutoff_flux", 1e-4))
    assert est_c.beta_le_alpha
    assert np.all(est_c.beta <= est_c.alpha)
    est_n = D.atom_estimate(u, (0.0, 0.0), S.RegKind("nonlinear_diffusion", 1e-4))
    assert np.all(est_n.beta >= est_n.alpha)  # u + eps u^{7/6} >= u
    assert est_n.gamma == pytest.approx(est_n.beta**2)


def test_local_mass_rate_constant_zero():
    grid = S.make_radial_grid(256, 1.0)
    u0 = S.RadialField(grid, np.full(256, 1.0))
    cfg = S.SolverConfig(backend="radial", t_end=5e-4, snapshot_dt=1e-4)
    traj = S.radial_run(cfg, S.RegKind("cutoff_flux", 1e-2), u0)
    series = D.local_mass_rate(traj, ((0.0, 0.0), 0.1))
    assert np.max(np.abs(series.rate)) <= 1e-10


def test_local_mass_rate_boundary_probe_uses_bump():
    grid = S.make_radial_grid(256, 1.0)
    u0 = S.initial_condition_radial(grid, "gaussian", mass=2.0, width=0.3)
    cfg = S.SolverConfig(backend="radial", t_end=5e-4, snapshot_dt=1e-4)
    traj = S.radial_run(cfg, S.RegKind("cutoff_flux", 1e-2), u0)
    series = D.local_mass_rate(traj, ((0.97, 0.0), 0.05))
    assert series.kind == "boundary"
    assert np.all(np.isfinite(series.rate))


def test_pure_diffusion_far_bump_rate_near_zero():
    # mass transported at finite discrete speed: a far probe sees nothing early
    u0 = S.initial_condition_rect(96, 96, 2.0, 2.0, "gaussian", mass=2.0, width=0.05, center=(0.4, 0.4))
    cfg = S.SolverConfig(backend="rect", t_end=2e-4, advection=False, snapshot_dt=5e-5)
    traj = S.run(cfg, S.RegKind("cutoff_flux", 1e-2), u0)
    series = D.local_mass_rate(traj, ((1.6, 1.6), 0.1))
    assert np.max(np.abs(series.rate)) < 1e-8


# --------------------------------------------------------------------------
# Sobolev inequality
# --------------------------------------------------------------------------


def test_sobolev_zero_field():
    u = S.Field(1 / 32, 1 / 32, np.zeros((32, 32)))
    eta = D._sobolev_eta(32, 1.0)
    lhs, rhs, ok = D.sobolev_check(u, eta, 0.5)
    assert lhs == 0.0 and ok


def test_sobolev_regression_family():
    rng = np.random.default_rng(20240)
    eta = D._sobolev_eta(96, 1.0)
    for _ in range(100):
        u = D.random_band_limited_field(96, 1.0, rng)
        _, _, ok = D.sobolev_check(u, eta, 0.5)
        assert ok


def test_sobolev_frozen_constant_covers_requirement():
    assert D.DEFAULT_SOBOLEV_C >= 1.2 * D.calibrate_sobolev_constant(n_fields=30)


def test_sobolev_near_extremal_ratio_below_one():
    hx = 1.0 / 192
    x = (np.arange(192) + 0.5) * hx
    X, Y = np.meshgrid(x, x, indexing="ij")
    eta = D._sobolev_eta(192, 1.0)
    ratios = []
    for R in (0.12, 0.08, 0.05):
        r2 = ((X - 0.5) ** 2 + (Y - 0.5) ** 2) / R**2
        u = S.Field(hx, hx, np.maximum(1 - r2, 0.0) ** 5)
        lhs, t1, _ = D.sobolev_check(u, eta, 0.5, C=0.0)
        ratios.append(lhs / t1)
    assert all(r <= 1.0 for r in ratios)
    assert ratios == sorted(ratios)  # sharpens toward the cap as R shrinks


# --------------------------------------------------------------------------
# separable quadratic probes
# --------------------------------------------------------------------------


def _short_traj():
    grid = S.make_radial_grid(128, 1.0)
    u0 = S.initial_condition_radial(grid, "gaussian", mass=3.0, width=0.25)
    cfg = S.SolverConfig(backend="radial", t_end=1e-3, snapshot_dt=2.5e-4)
    return S.radial_run(cfg, S.RegKind("cutoff_flux", 1e-2), u0)


def test_quadratic_probe_constant_phi():
    traj = _short_traj()
    T = traj.times[-1] - traj.times[0]
    one = lambda pts: np.ones(pts.shape[:-1])
    got = D.quadratic_weak_limit_probe(traj, [(one, one)])
    assert got == pytest.approx(3.0**2 * T, rel=1e-9)


def test_quadratic_probe_separable_factor():
    traj = _short_traj()
    g = lambda pts: pts[..., 0] ** 2 + pts[..., 1] ** 2
    one = lambda pts: np.ones(pts.shape[:-1])
    got = D.quadratic_weak_limit_probe(traj, [(g, one)])
    # mass * int int g u dx dt, with the same midpoint rule
    times = np.asarray(traj.times)
    acc = 0.0
    for k in range(times.size - 1):
        u_mid = 0.5 * (traj.snapshots[k] + traj.snapshots[k + 1])
        gu = 2 * np.pi * np.sum(traj.grid.centers**2 * u_mid * traj.grid.vol)
        acc += (times[k + 1] - times[k]) * gu * 3.0
    assert got == pytest.approx(acc, rel=1e-6)


def test_quadratic_probe_two_ball_product():
    traj = _short_traj()
    term = (("ball", (0.0, 0.0), 0.2), ("ball", (0.4, 0.0), 0.1))
    got = D.quadratic_weak_limit_probe(traj, [term])
    assert np.isfinite(got) and got > 0


def test_quadratic_probe_rejects_nonseparable():
    traj = _short_traj()
    with pytest.raises(ValueError):
        D.quadratic_weak_limit_probe(traj, [("not-a-factor", "x")])
