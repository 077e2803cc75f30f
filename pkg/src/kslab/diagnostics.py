"""Monitored quantities: entropy, local masses and rates, atoms, inequalities.

Most checks revolve around ball masses.  On the rectangle these use exact
cell-circle overlap areas for the partially covered ring of cells, so that
differences between consecutive ladder radii are not drowned in staircase
noise; on the radial grid the integrals are exact partial sums (centered
balls) or per-cell angular quadrature (off-center weights).

Atom bookkeeping: for a concentration center, ``alpha`` is the ball mass
of u, ``beta`` the ball mass of the companion density (the saturated flux
f_eps(u) for the cutoff model, u + eps u^{7/6} for the nonlinear-diffusion
model), and ``gamma = beta^2`` the near-diagonal quadratic mass.  The
eight-pi diagnostics attach alpha^2 / (8 pi beta) for the second model and
the inequality pair (beta <= alpha, beta^2 <= 8 pi alpha) for the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .solver import Field, RadialField, RadialGrid, RegKind, Trajectory, f_eps
from .testfn import PHI_SUPPORT, BoundaryBump, InteriorBump, build_boundary_bump
from .geometry import unit_disk, distance_to_boundary

__all__ = [
    "M0_CUTOFF",
    "M0_NONLIN",
    "DEFAULT_SOBOLEV_C",
    "entropy",
    "entropy_epsilon_bound",
    "ball_mass_radial",
    "ball_weights_radial",
    "ball_weights_rect",
    "circle_rect_overlap",
    "ball_mass_map_rect",
    "detect_concentrations",
    "AtomEstimate",
    "atom_estimate",
    "ProbeSeries",
    "local_mass_rate",
    "local_lp",
    "sobolev_check",
    "calibrate_sobolev_constant",
    "random_band_limited_field",
    "quadratic_weak_limit_probe",
]

M0_CUTOFF = 8.0 * np.pi / 27.0  # small-mass threshold, cutoff model
M0_NONLIN = 4.0 * np.pi / 27.0  # small-mass threshold, nonlinear-diffusion model

# Frozen regression constant for the localized cubic Sobolev bound, found
# by maximizing the required constant over the seeded random family plus
# gradient-free plateau profiles in ``calibrate_sobolev_constant``
# (requirement ~4e-8 with the reference cutoff; the ||grad eta||^6 weight
# makes the residual term very forgiving) and padded an order of magnitude.
DEFAULT_SOBOLEV_C = 5e-7

_ULOG_FLOOR = 1e-280


def _log_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Logarithmic mean, continuous at a = b, zero if either side is zero."""
    out = np.zeros(np.broadcast(a, b).shape)
    pos = (a > 0) & (b > 0)
    close = pos & (np.abs(a - b) <= 1e-12 * (a + b))
    out[close] = 0.5 * (a + b)[close] if np.ndim(a + b) else 0.5 * (a + b)
    gen = pos & ~close
    out[gen] = (a - b)[gen] / (np.log(a[gen]) - np.log(b[gen]))
    return out


def entropy(u: Field | RadialField, v, epsilon: float) -> tuple[float, float]:
    """Free energy E and its dissipation D for the current (u, v) pair.

    E = int [ u(log u - 1) + 6 eps u^{7/6} - |grad v|^2 / 2 ],
    D = int u | grad(log u + 7 eps u^{1/6}) - grad v |^2,

    with u log u := 0 at vacuum and the face weight for D taken as the
    logarithmic mean, which makes dE/dt = -D exact for the semi-discrete
    heat flow.  ``v`` may be None (treated as zero potential).
    """
    vals = u.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ulogu = np.where(vals > _ULOG_FLOOR, vals * (np.log(np.maximum(vals, _ULOG_FLOOR)) - 1.0), 0.0)
    bulk = ulogu + 6.0 * epsilon * vals ** (7.0 / 6.0)

    if isinstance(u, RadialField):
        grid = u.grid
        E = 2.0 * np.pi * float(np.sum(bulk * grid.vol))
        dcen = np.diff(grid.centers)
        rf = grid.faces[1:-1]
        face_meas = 2.0 * np.pi * rf * dcen
        if v is not None:
            vr = np.diff(v.values) / dcen
            E -= 0.5 * float(np.sum(vr**2 * face_meas))
        else:
            vr = np.zeros(grid.n - 1)
        D = _dissipation_1d(vals, dcen, vr, face_meas, epsilon)
        return E, D

    hx, hy = u.hx, u.hy
    E = float(np.sum(bulk) * hx * hy)
    if v is not None:
        wx = (v.values[1:, :] - v.values[:-1, :]) / hx
        wy = (v.values[:, 1:] - v.values[:, :-1]) / hy
        E -= 0.5 * float((np.sum(wx**2) + np.sum(wy**2)) * hx * hy)
    else:
        wx = np.zeros((u.nx - 1, u.ny))
        wy = np.zeros((u.nx, u.ny - 1))
    D = _dissipation_1d(vals, hx, wx, hx * hy, epsilon, axis=0) + _dissipation_1d(
        vals, hy, wy, hx * hy, epsilon, axis=1
    )
    return E, D


def _dissipation_1d(vals, spacing, w, face_meas, epsilon, axis=None) -> float:
    if axis == 0:
        a, b = vals[:-1, :], vals[1:, :]
    elif axis == 1:
        a, b = vals[:, :-1], vals[:, 1:]
    else:
        a, b = vals[:-1], vals[1:]
    lm = _log_mean(a, b)
    pos = (a > _ULOG_FLOOR) & (b > _ULOG_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.where(pos, np.log(np.maximum(b, _ULOG_FLOOR)) - np.log(np.maximum(a, _ULOG_FLOOR)), 0.0)
        d16 = b ** (1.0 / 6.0) - a ** (1.0 / 6.0)
    g = (dlog + 7.0 * epsilon * d16) / spacing - w
    term = np.where(pos, lm * g**2, 4.0 * ((np.sqrt(b) - np.sqrt(a)) / spacing) ** 2)
    return float(np.sum(term * face_meas))


def entropy_epsilon_bound(traj: Trajectory, alpha_exp: float = 0.1) -> float:
    """max_t eps^{1+alpha} int u^{7/6}, for cross-eps boundedness studies."""
    if traj.reg.is_cutoff:
        raise ValueError("entropy_epsilon_bound applies to nonlinear_diffusion runs")
    eps = traj.reg.epsilon
    return eps ** (1.0 + alpha_exp) * max(row["int_u76"] for row in traj.diag)


# ---------------------------------------------------------------------------
# ball integrals
# ---------------------------------------------------------------------------


def ball_weights_radial(grid: RadialGrid, rho: float) -> np.ndarray:
    """Exact per-cell weights of the centered ball (integral of r dr slice)."""
    lo = np.minimum(grid.faces[:-1], rho)
    hi = np.minimum(grid.faces[1:], rho)
    return np.pi * (hi**2 - lo**2)


def ball_mass_radial(u: RadialField, rho: float) -> float:
    return float(np.sum(ball_weights_radial(u.grid, rho) * u.values))


def offcenter_ball_weights_radial(grid: RadialGrid, center_r: float, rho: float, n_quad: int = 8) -> np.ndarray:
    """Weights so that sum(w * u) = int_{B_rho((center_r, 0))} u for radial u.

    Angular extent at radius r: the circle |x - c| <= rho covers angles
    with cos(theta) >= (r^2 + c^2 - rho^2) / (2 r c).
    """
    gl, glw = np.polynomial.legendre.leggauss(n_quad)
    r_lo = grid.faces[:-1][:, None]
    r_hi = grid.faces[1:][:, None]
    r = 0.5 * (r_hi + r_lo) + 0.5 * (r_hi - r_lo) * gl[None, :]
    wr = 0.5 * (r_hi - r_lo) * glw[None, :]
    c = center_r
    if c == 0.0:
        ang = np.where(r <= rho, 2.0 * np.pi, 0.0)
    else:
        cosv = (r**2 + c**2 - rho**2) / (2.0 * r * np.maximum(c, 1e-300))
        ang = 2.0 * np.arccos(np.clip(cosv, -1.0, 1.0))
    return np.sum(ang * r * wr, axis=1)


def circle_rect_overlap(x0, x1, y0, y1, rho: float):
    """Exact area of [x0,x1]x[y0,y1] ∩ disk(0, rho); arguments broadcast."""

    def F1(x):
        x = np.clip(x, -rho, rho)
        return 0.5 * (x * np.sqrt(np.maximum(rho**2 - x**2, 0.0)) + rho**2 * np.arcsin(x / rho))

    def G(x, y):
        # area of disk ∩ {X <= x, Y <= y}
        x = np.clip(x, -rho, rho)
        y = np.clip(y, -rho, rho)
        xs = np.sqrt(np.maximum(rho**2 - y**2, 0.0))
        # strip |X| <= min(x, xs): integrand y + sqrt(rho^2 - X^2)
        xa = np.minimum(x, -xs)
        xb = np.minimum(x, xs)
        part_mid = y * (xb - (-xs)) + (F1(xb) - F1(-xs))
        part_mid = np.where(xb > -xs, part_mid, 0.0)
        # left of -xs: chord fully below y when y >= 0 (contributes 2s), none when y < 0
        left_full = 2.0 * (F1(xa) - F1(-rho))
        right_full = 2.0 * (F1(x) - F1(xs))
        full = np.where(y >= 0.0, left_full + np.where(x > xs, right_full, 0.0), 0.0)
        return part_mid + full

    return G(x1, y1) - G(x0, y1) - G(x1, y0) + G(x0, y0)


def ball_weights_rect(u: Field, center, rho: float) -> np.ndarray:
    """Exact overlap areas of disk(center, rho) with each grid cell."""
    cx, cy = center
    x = np.arange(u.nx) * u.hx - cx
    y = np.arange(u.ny) * u.hy - cy
    X0, Y0 = np.meshgrid(x, y, indexing="ij")
    return circle_rect_overlap(X0, X0 + u.hx, Y0, Y0 + u.hy, rho)


def ball_mass_map_rect(u: Field, rho: float) -> np.ndarray:
    """Ball-mass map x -> int_{B_rho(x)} u at every cell center (FFT conv)."""
    kx = int(np.ceil(rho / u.hx)) + 1
    ky = int(np.ceil(rho / u.hy)) + 1
    ox = (np.arange(-kx, kx + 1) - 0.5) * u.hx
    oy = (np.arange(-ky, ky + 1) - 0.5) * u.hy
    OX, OY = np.meshgrid(ox, oy, indexing="ij")
    kernel = circle_rect_overlap(OX, OX + u.hx, OY, OY + u.hy, rho)
    return scipy.signal.fftconvolve(u.values, kernel, mode="same")


def _ball_mass(u, center, rho: float) -> float:
    if isinstance(u, RadialField):
        c = float(np.hypot(*center))
        if c == 0.0:
            return ball_mass_radial(u, rho)
        return float(np.sum(offcenter_ball_weights_radial(u.grid, c, rho) * u.values))
    return float(np.sum(ball_weights_rect(u, center, rho) * u.values))


# ---------------------------------------------------------------------------
# concentration detection and atoms
# ---------------------------------------------------------------------------


def detect_concentrations(u: Field | RadialField, m0: float, rho: float, u0_mass: float | None = None):
    """Centers where the ball-mass map has a local maximum above m0/2.

    Deduplicated within 2*rho; the count may not exceed
    N = floor(4 * initial mass / m0).  Radial fields report at most the
    origin (any radially symmetric atom sits there).
    """
    total = u.mass() if u0_mass is None else u0_mass
    n_max = int(np.floor(4.0 * total / m0))
    if isinstance(u, RadialField):
        if ball_mass_radial(u, rho) >= 0.5 * m0:
            return [np.zeros(2)] if n_max >= 1 else []
        return []
    mmap = ball_mass_map_rect(u, rho)
    interior = mmap
    nb = np.ones(interior.shape, dtype=bool)
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx == 0 and sy == 0:
                continue
            shifted = np.roll(interior, (sx, sy), axis=(0, 1))
            nb &= interior >= shifted
    cand = np.argwhere(nb & (interior >= 0.5 * m0))
    masses = interior[cand[:, 0], cand[:, 1]] if cand.size else np.array([])
    order = np.argsort(-masses)
    centers = []
    for idx in order:
        i, j = cand[idx]
        p = np.array([(i + 0.5) * u.hx, (j + 0.5) * u.hy])
        if all(np.hypot(*(p - q)) > 2.0 * rho for q in centers):
            centers.append(p)
        if len(centers) >= n_max:
            break
    return centers


@dataclass
class AtomEstimate:
    """Ladder of ball masses around one concentration center."""

    center: np.ndarray
    rho_ladder: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    plateau_alpha: float
    plateau_beta: float
    plateau_window: tuple
    no_atom: bool
    truncated: bool
    ratio_eight_pi: float | None = None  # alpha^2/(8 pi beta), diffusion model
    beta_le_alpha: bool | None = None  # cutoff model inequalities
    beta_sq_le_8pi_alpha: bool | None = None


def atom_estimate(
    u: Field | RadialField,
    center,
    reg: RegKind,
    rho_ladder=None,
    plateau_tol: float = 0.10,
) -> AtomEstimate:
    """Ladder masses, plateau extraction, and the eight-pi attachments."""
    center = np.asarray(center, dtype=float)
    if rho_ladder is None:
        rho_ladder = np.array([0.02, 0.03, 0.05, 0.08, 0.12, 0.18])
    rho_ladder = np.asarray(rho_ladder, dtype=float)
    if isinstance(u, RadialField):
        truncated = bool(np.hypot(*center) + rho_ladder[-1] > 1.0)
    else:
        truncated = bool(
            np.any(center - rho_ladder[-1] < 0)
            or center[0] + rho_ladder[-1] > u.nx * u.hx
            or center[1] + rho_ladder[-1] > u.ny * u.hy
        )
    if reg.is_cutoff:
        companion_vals = f_eps(u.values, reg.epsilon)
    else:
        companion_vals = u.values + reg.epsilon * u.values ** (7.0 / 6.0)
    if isinstance(u, RadialField):
        companion = RadialField(u.grid, companion_vals)
    else:
        companion = Field(u.hx, u.hy, companion_vals)
    alpha = np.array([_ball_mass(u, center, r) for r in rho_ladder])
    beta = np.array([_ball_mass(companion, center, r) for r in rho_ladder])
    gamma = beta**2
    # flattest window of three consecutive ladder radii
    spreads = [alpha[i : i + 3].max() - alpha[i : i + 3].min() for i in range(len(alpha) - 2)]
    k = int(np.argmin(spreads))
    window = (k, k + 3)
    pa = float(alpha[k : k + 3].mean())
    pb = float(beta[k : k + 3].mean())
    no_atom = pa <= 0 or spreads[k] > plateau_tol * max(pa, 1e-300)
    est = AtomEstimate(
        center=center,
        rho_ladder=rho_ladder,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        plateau_alpha=pa,
        plateau_beta=pb,
        plateau_window=window,
        no_atom=bool(no_atom),
        truncated=truncated,
    )
    if reg.is_cutoff:
        est.beta_le_alpha = bool(np.all(beta <= alpha + 1e-12 * np.maximum(alpha, 1.0)))
        est.beta_sq_le_8pi_alpha = bool(
            np.all(beta**2 <= 8.0 * np.pi * alpha * 1.1 + 1e-9)
        )
    else:
        est.ratio_eight_pi = float(pa**2 / (8.0 * np.pi * pb)) if pb > 0 else np.nan
    return est


# ---------------------------------------------------------------------------
# probes along trajectories
# ---------------------------------------------------------------------------


@dataclass
class ProbeSeries:
    x0: np.ndarray
    rho: float
    kind: str  # "interior" | "boundary"
    times: np.ndarray  # snapshot times
    weighted_mass: np.ndarray  # int psi u per snapshot
    mid_times: np.ndarray
    rate: np.ndarray  # time difference quotients
    rho2_abs_rate: np.ndarray
    rho2_onesided: np.ndarray | None = None  # diffusion model violation part
    ball_u76: np.ndarray | None = None


def _probe_weights(traj: Trajectory, x0: np.ndarray, rho: float):
    """Quadrature weights of the probe cutoff on the trajectory's grid."""
    domain = unit_disk()
    if traj.backend == "radial":
        grid = traj.grid
        d = 1.0 - float(np.hypot(*x0))
        if d >= PHI_SUPPORT * rho - 1e-12:
            bump = InteriorBump(x0, rho)
            kind = "interior"
        elif d <= 2.0 * rho + 1e-12:
            bump = build_boundary_bump(domain, x0, rho)
            kind = "boundary"
        else:
            raise ValueError("probe center neither interior-admissible nor within 2*rho of the wall")
        gl, glw = np.polynomial.legendre.leggauss(4)
        r_lo, r_hi = grid.faces[:-1][:, None], grid.faces[1:][:, None]
        r = 0.5 * (r_hi + r_lo) + 0.5 * (r_hi - r_lo) * gl[None, :]
        wr = 0.5 * (r_hi - r_lo) * glw[None, :]
        n_ang = 128
        th = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        pts = np.stack(
            [r[..., None] * np.cos(th), r[..., None] * np.sin(th)], axis=-1
        )
        psi = bump.value(pts)
        ang_avg = psi.mean(axis=-1) * 2.0 * np.pi
        w = np.sum(ang_avg * r * wr, axis=1)
        return w, kind
    # rectangle: interior probes only (no smooth boundary)
    u0 = traj.field_at(0)
    x = (np.arange(u0.nx) + 0.5) * u0.hx
    y = (np.arange(u0.ny) + 0.5) * u0.hy
    X, Y = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    bump = InteriorBump(x0, rho)
    return bump.value(pts) * u0.cell_area, "interior"


def local_mass_rate(traj: Trajectory, probe) -> ProbeSeries:
    """Discrete d/dt of the probe-weighted mass along snapshots.

    ``probe`` is ``(x0, rho)``.  For nonlinear-diffusion runs the
    companion column carries the negative part of
    rate + (2 eps / rho^2) int_{B_rho} u^{7/6} (the one-sided bound's
    violation measure), scaled by rho^2.
    """
    x0, rho = np.asarray(probe[0], dtype=float), float(probe[1])
    w, kind = _probe_weights(traj, x0, rho)
    times = np.asarray(traj.times)
    pm = np.array([float(np.sum(w * snap)) for snap in traj.snapshots])
    dt = np.diff(times)
    keep = dt > 1e-14
    rate = np.where(keep, np.diff(pm) / np.where(keep, dt, 1.0), 0.0)
    mid = 0.5 * (times[1:] + times[:-1])
    series = ProbeSeries(
        x0=x0,
        rho=rho,
        kind=kind,
        times=times,
        weighted_mass=pm,
        mid_times=mid,
        rate=rate,
        rho2_abs_rate=rho**2 * np.abs(rate),
    )
    if not traj.reg.is_cutoff and traj.reg.epsilon > 0:
        eps = traj.reg.epsilon
        if traj.backend == "radial":
            bw = ball_weights_radial(traj.grid, rho)
        else:
            bw = ball_weights_rect(traj.field_at(0), x0, rho)
        u76 = np.asarray([float(np.sum(bw * snap ** (7.0 / 6.0))) for snap in traj.snapshots])
        u76_mid = 0.5 * (u76[1:] + u76[:-1])
        series.ball_u76 = u76
        series.rho2_onesided = rho**2 * np.maximum(
            0.0, -(rate + (2.0 * eps / rho**2) * u76_mid)
        )
    return series


def local_lp(traj: Trajectory, probe, p: float) -> dict:
    """Series of int_{B_rho} u^p plus the small-mass hypothesis column
    int_{B_{4 rho}} u (to check the local theory's applicability)."""
    x0, rho = np.asarray(probe[0], dtype=float), float(probe[1])
    out = {"t": np.asarray(traj.times), "lp": [], "mass4": []}
    for snap in traj.snapshots:
        if traj.backend == "radial":
            fld = RadialField(traj.grid, snap)
            fldp = RadialField(traj.grid, snap**p)
        else:
            fld = Field(traj.hx, traj.hy, snap)
            fldp = Field(traj.hx, traj.hy, snap**p)
        out["lp"].append(_ball_mass(fldp, x0, rho))
        out["mass4"].append(_ball_mass(fld, x0, 4.0 * rho))
    out["lp"] = np.asarray(out["lp"])
    out["mass4"] = np.asarray(out["mass4"])
    out["rho4_lp"] = rho**4 * out["lp"]
    return out


# ---------------------------------------------------------------------------
# localized cubic Sobolev inequality
# ---------------------------------------------------------------------------


def sobolev_check(u: Field, eta: Field, delta: float, C: float = DEFAULT_SOBOLEV_C):
    """Check int u^3 eta^6 against the gradient-mass bound.

    rhs = 9(1+delta)/(16 pi) [int |grad u|^2 eta^6][int_{supp eta} u]
          + (C/delta^5) ||grad eta||_inf^6 (int_{supp eta} u)^3 |supp eta|.
    Returns (lhs, rhs, passed).
    """
    area = u.cell_area
    uv, ev = u.values, eta.values
    lhs = float(np.sum(uv**3 * ev**6) * area)
    gx = np.zeros_like(uv)
    gy = np.zeros_like(uv)
    gx[1:-1, :] = (uv[2:, :] - uv[:-2, :]) / (2 * u.hx)
    gy[:, 1:-1] = (uv[:, 2:] - uv[:, :-2]) / (2 * u.hy)
    grad2 = gx**2 + gy**2
    egx = np.zeros_like(ev)
    egy = np.zeros_like(ev)
    egx[1:-1, :] = (ev[2:, :] - ev[:-2, :]) / (2 * u.hx)
    egy[:, 1:-1] = (ev[:, 2:] - ev[:, :-2]) / (2 * u.hy)
    grad_eta_inf = float(np.max(np.hypot(egx, egy)))
    supp = ev > 0
    mass_supp = float(np.sum(uv[supp]) * area)
    supp_area = float(np.sum(supp) * area)
    t1 = (9.0 * (1.0 + delta) / (16.0 * np.pi)) * float(np.sum(grad2 * ev**6) * area) * mass_supp
    t2 = (C / delta**5) * grad_eta_inf**6 * mass_supp**3 * supp_area
    rhs = t1 + t2
    return lhs, rhs, bool(lhs <= rhs)


def random_band_limited_field(nx: int, lx: float, rng, k_max: int = 6, kind: str = "squared") -> Field:
    """Nonnegative smooth random field: low-pass Gaussian noise, squared."""
    hx = lx / nx
    noise = rng.normal(size=(nx, nx))
    spec = scipy.fft.fft2(noise)
    k = np.fft.fftfreq(nx, d=1.0 / nx)
    mask = (np.abs(k)[:, None] <= k_max) & (np.abs(k)[None, :] <= k_max)
    smooth = np.real(scipy.fft.ifft2(spec * mask))
    vals = smooth**2 if kind == "squared" else np.abs(smooth)
    return Field(hx, hx, vals)


def _sobolev_eta(nx: int, lx: float) -> Field:
    hx = lx / nx
    x = (np.arange(nx) + 0.5) * hx
    X, Y = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(X - lx / 2, Y - lx / 2)
    s = np.clip((r - 0.25 * lx) / (0.15 * lx), 0.0, 1.0)
    vals = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    return Field(hx, hx, vals)


def calibrate_sobolev_constant(
    n_fields: int = 100, nx: int = 96, lx: float = 1.0, delta: float = 0.5, seed: int = 20240
) -> float:
    """Required constant maximized over the seeded random family (oracle)."""
    rng = np.random.default_rng(seed)
    eta = _sobolev_eta(nx, lx)
    area = (lx / nx) ** 2
    supp = eta.values > 0
    supp_area = float(np.sum(supp) * area)
    egx = np.zeros_like(eta.values)
    egy = np.zeros_like(eta.values)
    egx[1:-1, :] = (eta.values[2:, :] - eta.values[:-2, :]) / (2 * eta.hx)
    egy[:, 1:-1] = (eta.values[:, 2:] - eta.values[:, :-2]) / (2 * eta.hy)
    gi = float(np.max(np.hypot(egx, egy)))

    def required(u: Field) -> float:
        lhs, t1, _ = sobolev_check(u, eta, delta, C=0.0)  # rhs = gradient term alone
        mass = float(np.sum(u.values[supp]) * area)
        if mass <= 0:
            return 0.0
        return (lhs - t1) * delta**5 / (gi**6 * mass**3 * supp_area)

    worst = 0.0
    for _ in range(n_fields):
        worst = max(worst, required(random_band_limited_field(nx, lx, rng)))
    # gradient-free profiles are the ones that genuinely need the C term
    hx = lx / nx
    x = (np.arange(nx) + 0.5) * hx
    X, Y = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(X - lx / 2, Y - lx / 2)
    for level in (0.5, 1.0, 2.0, 5.0):
        worst = max(worst, required(Field(hx, hx, np.full((nx, nx), level))))
        for rad in (0.1 * lx, 0.2 * lx, 0.35 * lx):
            s = np.clip((r - rad) / (0.1 * lx), 0.0, 1.0)
            plateau = level * (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s))
            worst = max(worst, required(Field(hx, hx, plateau)))
    return worst


# ---------------------------------------------------------------------------
# separable quadratic probes
# ---------------------------------------------------------------------------


def quadratic_weak_limit_probe(traj: Trajectory, phi_terms) -> float:
    """Triple integral of u(x,t) u(y,t) phi(x, y, t) dx dy dt for separable
    phi = sum_k g_k(x) h_k(y) (time-independent factors).

    Terms are pairs (g, h); each factor is either a callable on points or
    the tuple ("ball", center, rho) meaning the ball indicator.  Raises on
    anything else (non-separable inputs are unsupported).
    """
    times = np.asarray(traj.times)
    if times.size < 2:
        raise ValueError("trajectory too short for a time integral")

    def factor_integral(factor, snap) -> float:
        if isinstance(factor, tuple) and factor and factor[0] == "ball":
            _, center, rho = factor
            if traj.backend == "radial":
                fld = RadialField(traj.grid, snap)
            else:
                fld = Field(traj.hx, traj.hy, snap)
            return _ball_mass(fld, np.asarray(center, dtype=float), float(rho))
        if not callable(factor):
            raise ValueError("unsupported (non-separable?) test factor")
        if traj.backend == "radial":
            grid = traj.grid
            n_ang = 64
            th = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
            c = grid.centers
            pts = np.stack(
                [c[:, None] * np.cos(th)[None, :], c[:, None] * np.sin(th)[None, :]], axis=-1
            )
            gavg = np.asarray(factor(pts)).mean(axis=1)
            return float(2.0 * np.pi * np.sum(gavg * snap * grid.vol))
        u0 = traj.field_at(0)
        x = (np.arange(u0.nx) + 0.5) * u0.hx
        y = (np.arange(u0.ny) + 0.5) * u0.hy
        X, Y = np.meshgrid(x, y, indexing="ij")
        pts = np.stack([X, Y], axis=-1)
        return float(np.sum(np.asarray(factor(pts)) * snap) * u0.cell_area)

    total = 0.0
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        if dt <= 0:
            continue
        mid_val = 0.0
        for g, h in phi_terms:
            ga = 0.5 * (factor_integral(g, traj.snapshots[k]) + factor_integral(g, traj.snapshots[k + 1]))
            ha = 0.5 * (factor_integral(h, traj.snapshots[k]) + factor_integral(h, traj.snapshots[k + 1]))
            mid_val += ga * ha
        total += dt * mid_val
    return total
