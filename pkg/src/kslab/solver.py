"""Conservative explicit solvers for the two regularized aggregation models.

Model A ("cutoff_flux") caps the advective density:

    u_t - Lap u + div(f_eps(u) grad v) = 0,   -Lap v = f_eps(u) - mean

with f_eps(u) = int_0^u min(1, (1/eps - s)_+) ds.  Model B
("nonlinear_diffusion") strengthens diffusion degenerately:

    u_t - Lap(u + eps u^{7/6}) + div(u grad v) = 0,   -Lap v = u - mean.

Both keep homogeneous Neumann walls, so the total mass is a telescoping
invariant of the finite-volume update (exact to rounding).  Two backends:

* rectangle, cell-centered 2D grid; the Poisson solve diagonalizes the
  discrete Neumann Laplacian in a cosine basis (exact for the stencil);
* unit disk under radial symmetry, non-uniform 1D grid in r with fluxes
  in (1/r)(r q)_r form; the Poisson solve is the cumulative quadrature
  v'(r) = -(1/r) int_0^r rhs s ds.

Diffusive fluxes are central; advective fluxes first-order upwind on the
face velocities grad v, which with the CFL bound keeps u nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

__all__ = [
    "Field",
    "RadialGrid",
    "RadialField",
    "RegKind",
    "SolverConfig",
    "RunState",
    "Trajectory",
    "SolverError",
    "CFLError",
    "f_eps",
    "big_F_eps",
    "solve_poisson_neumann",
    "radial_poisson_face_gradient",
    "step",
    "run",
    "radial_run",
    "make_radial_grid",
    "initial_condition_rect",
    "initial_condition_radial",
]


class SolverError(RuntimeError):
    pass


class CFLError(SolverError):
    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt} violates CFL; largest stable dt ~ {dt_max}")
        self.suggested_dt = dt_max


# ---------------------------------------------------------------------------
# fields and grids
# ---------------------------------------------------------------------------


@dataclass
class Field:
    """Cell-centered scalar on a rectangle; values[i, j] at ((i+.5)hx, (j+.5)hy)."""

    hx: float
    hy: float
    values: np.ndarray

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def copy(self) -> "Field":
        return Field(self.hx, self.hy, self.values.copy())

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return x, y


@dataclass(frozen=True)
class RadialGrid:
    """Non-uniform radial grid on [0, 1]; faces[0] = 0, faces[-1] = 1."""

    faces: np.ndarray

    @property
    def n(self) -> int:
        return self.faces.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.faces[1:] + self.faces[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.faces)

    @property
    def vol(self) -> np.ndarray:
        """Per-cell integral of r dr (multiply by 2*pi for area measure)."""
        return 0.5 * np.diff(self.faces**2)


def make_radial_grid(n: int = 4096, ratio: float = 1.0005) -> RadialGrid:
    """Geometric grid, finest at r = 0 (``ratio`` is the outward growth)."""
    if ratio == 1.0:
        faces = np.linspace(0.0, 1.0, n + 1)
    else:
        w0 = (ratio - 1.0) / (ratio**n - 1.0)
        widths = w0 * ratio ** np.arange(n)
        faces = np.concatenate([[0.0], np.cumsum(widths)])
        faces[-1] = 1.0
    return RadialGrid(faces=faces)


@dataclass
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def mass(self) -> float:
        return float(2.0 * np.pi * np.sum(self.values * self.grid.vol))

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())


# ---------------------------------------------------------------------------
# regularizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegKind:
    """Which regularization and its strength.

    ``epsilon == 0`` is admitted only for nonlinear_diffusion, where it
    degenerates to the unregularized scheme (used by the reduction test
    against a never-saturating cutoff run).
    """

    variant: str  # "cutoff_flux" | "nonlinear_diffusion"
    epsilon: float

    def __post_init__(self) -> None:
        if self.variant not in ("cutoff_flux", "nonlinear_diffusion"):
            raise ValueError(f"unknown regularization {self.variant!r}")
        if self.epsilon < 0.0 or (self.epsilon == 0.0 and self.variant == "cutoff_flux"):
            raise ValueError("epsilon must be positive (>= 0 only for nonlinear_diffusion)")

    @property
    def is_cutoff(self) -> bool:
        return self.variant == "cutoff_flux"


def f_eps(u, epsilon: float):
    """Saturating flux density: u below 1/eps - 1, then a parabolic bridge
    to the cap 1/eps - 1/2.  Monotone, f_eps(u) <= min(u, 1/eps)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("f_eps needs nonnegative input")
    a = 1.0 / epsilon - 1.0
    cap = 1.0 / epsilon - 0.5
    bridge = cap - 0.5 * (1.0 / epsilon - u) ** 2
    out = np.where(u <= a, u, np.where(u >= 1.0 / epsilon, cap, bridge))
    return float(out) if out.ndim == 0 else out


def big_F_eps(u, epsilon: float):
    """Antiderivative of f_eps; satisfies F_eps(u) <= u^2/2."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("big_F_eps needs nonnegative input")
    a = 1.0 / epsilon - 1.0
    cap = 1.0 / epsilon - 0.5
    mid = (
        0.5 * a**2
        + cap * (u - a)
        + ((1.0 / epsilon - u) ** 3 - 1.0) / 6.0
    )
    # F at u = 1/eps, then linear growth with slope cap
    f_at_cap = 0.5 * a**2 + cap - 1.0 / 6.0
    out = np.where(u <= a, 0.5 * u**2, np.where(u <= 1.0 / epsilon, mid, f_at_cap + cap * (u - 1.0 / epsilon)))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Poisson solves
# ---------------------------------------------------------------------------


def solve_poisson_neumann(rhs: Field, tol: float = 1e-10) -> Field:
    """-Lap v = rhs with zero-flux walls, mean(v) = 0; cosine-basis exact solve.

    The caller must hand in a (numerically) mean-zero right side.
    """
    vals = rhs.values
    mean = vals.mean()
    scale = float(np.max(np.abs(vals))) or 1.0
    if abs(mean) > tol * scale + 1e-300:
        raise SolverError(f"rhs mean {mean} exceeds tolerance; subtract it first")
    nx, ny = vals.shape
    rhat = scipy.fft.dctn(vals, type=2, norm="ortho")
    kx = (2.0 - 2.0 * np.cos(np.pi * np.arange(nx) / nx)) / rhs.hx**2
    ky = (2.0 - 2.0 * np.cos(np.pi * np.arange(ny) / ny)) / rhs.hy**2
    lam = kx[:, None] + ky[None, :]
    lam[0, 0] = 1.0
    vhat = rhat / lam
    vhat[0, 0] = 0.0
    v = scipy.fft.idctn(vhat, type=2, norm="ortho")
    return Field(rhs.hx, rhs.hy, v)


def radial_poisson_face_gradient(grid: RadialGrid, rhs: np.ndarray) -> np.ndarray:
    """v'(r) at the faces for -((r v')' / r) = rhs, v'(0) = 0.

    v'(r_j) = -(1/r_j) * sum of rhs * vol over cells inside r_j; the outer
    value vanishes exactly when the discrete disk mean of rhs is zero.
    """
    S = np.concatenate([[0.0], np.cumsum(rhs * grid.vol)])
    vr = np.zeros(grid.faces.size)
    inner = grid.faces > 0
    vr[inner] = -S[inner] / grid.faces[inner]
    return vr


def radial_potential(grid: RadialGrid, vr_faces: np.ndarray) -> np.ndarray:
    """Cell values of v from its face gradient, disk mean removed."""
    c = grid.centers
    v = np.zeros(grid.n)
    # integrate center-to-center using interior-face slopes
    dv = vr_faces[1:-1] * np.diff(c)
    v[1:] = np.cumsum(dv)
    v -= 2.0 * np.sum(v * grid.vol)  # subtract disk mean (|disk| = pi)
    return v


# ---------------------------------------------------------------------------
# configuration, state, trajectory
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    backend: str = "radial"  # "radial" | "rect"
    # rectangle
    nx: int = 256
    ny: int = 256
    lx: float = 1.0
    ly: float = 1.0
    # radial disk
    radial_n: int = 4096
    radial_ratio: float = 1.0005
    # time stepping
    dt_policy: str = "cfl"  # "cfl" | "fixed"
    dt_fixed: float = 1e-6
    cfl_safety: float = 0.9
    t_end: float = 0.1
    dt_min: float = 1e-12
    max_steps: int = 50_000_000
    snapshot_dt: float | None = None
    # tolerances and stopping
    elliptic_tol: float = 1e-10
    positivity_tol: float = 1e-13
    flag_umax_factor: float = 0.8  # "concentrated" flag at max u > factor/eps
    stop_umax_factor: float = 16.0  # hard stop well past flux saturation
    advection: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")


@dataclass
class RunState:
    u: Field | RadialField
    v: Field | RadialField | None
    t: float
    reg: RegKind
    mean_source: list = field(default_factory=list)  # h(t) per accepted step


@dataclass
class Trajectory:
    """Snapshots plus per-step diagnostics for one (regularization, eps) run."""

    backend: str
    reg: RegKind
    config: SolverConfig
    times: list
    snapshots: list  # value arrays at `times`
    diag: list  # per-step dict rows
    grid: RadialGrid | None = None
    hx: float | None = None
    hy: float | None = None
    concentrated: bool = False
    concentrated_time: float | None = None
    stop_reason: str = "t_end"
    failed: bool = False
    failure_message: str = ""

    def field_at(self, k: int):
        if self.backend == "radial":
            return RadialField(self.grid, self.snapshots[k])
        return Field(self.hx, self.hy, self.snapshots[k])

    def mass_series(self) -> np.ndarray:
        return np.asarray([row["mass"] for row in self.diag])

    def diag_columns(self):
        return ["t", "mass", "min_u", "max_u", "entropy", "dissipation", "h_t", "int_u76"]


# ---------------------------------------------------------------------------
# stepping: rectangle backend
# ---------------------------------------------------------------------------


def _mobility(u_vals: np.ndarray, reg: RegKind) -> np.ndarray:
    return f_eps(u_vals, reg.epsilon) if reg.is_cutoff else u_vals


def _rect_face_quantities(state: RunState, config: SolverConfig):
    u = state.u
    vals = u.values
    source = _mobility(vals, state.reg)
    h_t = float(source.mean())
    v = solve_poisson_neumann(Field(u.hx, u.hy, source - h_t), config.elliptic_tol)
    if state.reg.is_cutoff:
        dcx = np.ones((u.nx - 1, u.ny))
        dcy = np.ones((u.nx, u.ny - 1))
    else:
        eps = state.reg.epsilon
        ufx = 0.5 * (vals[1:, :] + vals[:-1, :])
        ufy = 0.5 * (vals[:, 1:] + vals[:, :-1])
        dcx = 1.0 + eps * (7.0 / 6.0) * ufx ** (1.0 / 6.0)
        dcy = 1.0 + eps * (7.0 / 6.0) * ufy ** (1.0 / 6.0)
    if config.advection:
        wx = (v.values[1:, :] - v.values[:-1, :]) / u.hx
        wy = (v.values[:, 1:] - v.values[:, :-1]) / u.hy
    else:
        wx = np.zeros((u.nx - 1, u.ny))
        wy = np.zeros((u.nx, u.ny - 1))
    return v, h_t, dcx, dcy, wx, wy


def _rect_cfl_dt(u: Field, dcx, dcy, wx, wy, safety: float) -> float:
    dmax = max(float(dcx.max()), float(dcy.max()))
    rate = 2.0 * dmax / u.hx**2 + 2.0 * dmax / u.hy**2
    rate += 2.0 * float(np.max(np.abs(wx))) / u.hx if wx.size else 0.0
    rate += 2.0 * float(np.max(np.abs(wy))) / u.hy if wy.size else 0.0
    return safety / rate


def _rect_apply_fluxes(u: Field, reg: RegKind, dcx, dcy, wx, wy, dt: float) -> None:
    vals = u.values
    m = _mobility(vals, reg)
    # x faces
    mx_up = np.where(wx > 0.0, m[:-1, :], m[1:, :])
    fx = -dcx * (vals[1:, :] - vals[:-1, :]) / u.hx + mx_up * wx
    my_up = np.where(wy > 0.0, m[:, :-1], m[:, 1:])
    fy = -dcy * (vals[:, 1:] - vals[:, :-1]) / u.hy + my_up * wy
    div = np.zeros_like(vals)
    div[:-1, :] += fx / u.hx
    div[1:, :] -= fx / u.hx
    div[:, :-1] += fy / u.hy
    div[:, 1:] -= fy / u.hy
    vals -= dt * div


# ---------------------------------------------------------------------------
# stepping: radial backend
# ---------------------------------------------------------------------------


def _radial_face_quantities(state: RunState, config: SolverConfig):
    u: RadialField = state.u
    grid = u.grid
    source = _mobility(u.values, state.reg)
    h_t = float(2.0 * np.sum(source * grid.vol))  # disk mean (|disk| = pi)
    vr = radial_poisson_face_gradient(grid, source - h_t)
    if not config.advection:
        vr = np.zeros_like(vr)
    if state.reg.is_cutoff:
        dc = np.ones(grid.n - 1)
    else:
        eps = state.reg.epsilon
        uf = 0.5 * (u.values[1:] + u.values[:-1])
        dc = 1.0 + eps * (7.0 / 6.0) * uf ** (1.0 / 6.0)
    return vr, h_t, dc


def _radial_cfl_dt(u: RadialField, dc: np.ndarray, vr: np.ndarray, safety: float) -> float:
    grid = u.grid
    dcen = np.diff(grid.centers)
    rf = grid.faces[1:-1]
    w = np.abs(vr[1:-1])
    face_rate = rf * (dc / dcen + w)  # per interior face
    cell_rate = np.zeros(grid.n)
    cell_rate[:-1] += face_rate
    cell_rate[1:] += face_rate
    rate = float(np.max(cell_rate / grid.vol))
    return safety / rate if rate > 0 else np.inf


def _radial_apply_fluxes(u: RadialField, reg: RegKind, dc, vr, dt: float) -> None:
    grid = u.grid
    vals = u.values
    m = _mobility(vals, reg)
    dcen = np.diff(grid.centers)
    w = vr[1:-1]
    m_up = np.where(w > 0.0, m[:-1], m[1:])
    q = -dc * (vals[1:] - vals[:-1]) / dcen + m_up * w
    Q = grid.faces[1:-1] * q  # boundary faces carry zero flux
    div = np.zeros_like(vals)
    div[:-1] += Q / grid.vol[:-1]
    div[1:] -= Q / grid.vol[1:]
    vals -= dt * div


# ---------------------------------------------------------------------------
# public stepping and run drivers
# ---------------------------------------------------------------------------


def step(state: RunState, dt: float, config: SolverConfig | None = None) -> RunState:
    """Advance one explicit step; checks CFL and positivity, records h(t)."""
    config = config or SolverConfig(backend="rect" if isinstance(state.u, Field) else "radial")
    if isinstance(state.u, Field):
        v, h_t, dcx, dcy, wx, wy = _rect_face_quantities(state, config)
        dt_max = _rect_cfl_dt(state.u, dcx, dcy, wx, wy, 1.0)
        if dt > dt_max:
            raise CFLError(dt, dt_max)
        _rect_apply_fluxes(state.u, state.reg, dcx, dcy, wx, wy, dt)
        state.v = v
    else:
        vr, h_t, dc = _radial_face_quantities(state, config)
        dt_max = _radial_cfl_dt(state.u, dc, vr, 1.0)
        if dt > dt_max:
            raise CFLError(dt, dt_max)
        _radial_apply_fluxes(state.u, state.reg, dc, vr, dt)
        state.v = RadialField(state.u.grid, radial_potential(state.u.grid, vr))
    if float(state.u.values.min()) < -config.positivity_tol:
        raise SolverError(f"positivity lost: min u = {state.u.values.min()}")
    state.t += dt
    state.mean_source.append(h_t)
    return state


def _run_driver(state: RunState, config: SolverConfig) -> Trajectory:
    from . import diagnostics as diag_mod

    is_rect = isinstance(state.u, Field)
    traj = Trajectory(
        backend="rect" if is_rect else "radial",
        reg=state.reg,
        config=config,
        times=[],
        snapshots=[],
        diag=[],
        grid=None if is_rect else state.u.grid,
        hx=state.u.hx if is_rect else None,
        hy=state.u.hy if is_rect else None,
    )

    def record_snapshot():
        traj.times.append(state.t)
        traj.snapshots.append(state.u.values.copy())

    def record_diag(h_t: float):
        vals = state.u.values
        # with advection disabled the free energy of the dynamics carries
        # no potential term
        v_for_entropy = state.v if config.advection else None
        E, D = diag_mod.entropy(state.u, v_for_entropy, state.reg.epsilon)
        if is_rect:
            int_u76 = float(np.sum(vals ** (7.0 / 6.0)) * state.u.cell_area)
        else:
            int_u76 = float(2.0 * np.pi * np.sum(vals ** (7.0 / 6.0) * state.u.grid.vol))
        traj.diag.append(
            {
                "t": state.t,
                "mass": state.u.mass(),
                "min_u": float(vals.min()),
                "max_u": float(vals.max()),
                "entropy": E,
                "dissipation": D,
                "h_t": h_t,
                "int_u76": int_u76,
            }
        )

    record_snapshot()
    eps = state.reg.epsilon
    flag_level = config.flag_umax_factor / eps if eps > 0 else np.inf
    stop_level = config.stop_umax_factor / eps if eps > 0 else np.inf
    next_snap = state.t + (config.snapshot_dt or np.inf)
    steps = 0
    try:
        while state.t < config.t_end - 1e-15 and steps < config.max_steps:
            if is_rect:
                v, h_t, dcx, dcy, wx, wy = _rect_face_quantities(state, config)
                dt_max = _rect_cfl_dt(state.u, dcx, dcy, wx, wy, config.cfl_safety)
            else:
                vr, h_t, dc = _radial_face_quantities(state, config)
                dt_max = _radial_cfl_dt(state.u, dc, vr, config.cfl_safety)
            dt = config.dt_fixed if config.dt_policy == "fixed" else dt_max
            if config.dt_policy == "fixed" and dt > dt_max / config.cfl_safety:
                raise CFLError(dt, dt_max / config.cfl_safety)
            dt = min(dt, config.t_end - state.t)
            if dt < config.dt_min:
                traj.stop_reason = "dt_min"
                break
            if is_rect:
                _rect_apply_fluxes(state.u, state.reg, dcx, dcy, wx, wy, dt)
                state.v = v
            else:
                _radial_apply_fluxes(state.u, state.reg, dc, vr, dt)
                state.v = RadialField(state.u.grid, radial_potential(state.u.grid, vr))
            if float(state.u.values.min()) < -config.positivity_tol:
                raise SolverError(f"positivity lost: min u = {state.u.values.min()}")
            state.t += dt
            state.mean_source.append(h_t)
            record_diag(h_t)
            steps += 1
            umax = float(state.u.values.max())
            if not traj.concentrated and umax > flag_level:
                traj.concentrated = True
                traj.concentrated_time = state.t
                record_snapshot()
            if state.t >= next_snap - 1e-15:
                record_snapshot()
                next_snap += config.snapshot_dt
            if umax > stop_level:
                traj.stop_reason = "umax_stop"
                break
        else:
            if steps >= config.max_steps:
                traj.stop_reason = "max_steps"
    except SolverError as exc:
        traj.failed = True
        traj.failure_message = str(exc)
        traj.stop_reason = "error"
    if not traj.times or traj.times[-1] != state.t:
        record_snapshot()
    return traj


def run(config: SolverConfig, reg: RegKind, u0: Field) -> Trajectory:
    """Rectangle run from the given initial field."""
    state = RunState(u=u0.copy(), v=None, t=0.0, reg=reg)
    return _run_driver(state, config)


def radial_run(config: SolverConfig, reg: RegKind, u0: RadialField) -> Trajectory:
    """Radially symmetric disk run (1D reduction of the same flux form)."""
    state = RunState(u=u0.copy(), v=None, t=0.0, reg=reg)
    return _run_driver(state, config)


# ---------------------------------------------------------------------------
# initial data catalog
# ---------------------------------------------------------------------------


def initial_condition_radial(grid: RadialGrid, kind: str, **params) -> RadialField:
    """Catalog entries: gaussian(mass, width), annulus(mass, r0, width),
    constant(value).  Profiles are normalized to the requested disk mass."""
    c = grid.centers
    if kind == "gaussian":
        width = params["width"]
        prof = np.exp(-(c**2) / (2.0 * width**2))
    elif kind == "annulus":
        r0, width = params["r0"], params["width"]
        prof = np.exp(-((c - r0) ** 2) / (2.0 * width**2))
    elif kind == "constant":
        f = RadialField(grid, np.full(grid.n, float(params["value"])))
        return f
    else:
        raise ValueError(f"unknown radial initial kind {kind!r}")
    f = RadialField(grid, prof)
    f.values *= params["mass"] / f.mass()
    return f


def initial_condition_rect(
    nx: int, ny: int, lx: float, ly: float, kind: str, **params
) -> Field:
    hx, hy = lx / nx, ly / ny
    x = (np.arange(nx) + 0.5) * hx
    y = (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(x, y, indexing="ij")
    if kind == "constant":
        return Field(hx, hy, np.full((nx, ny), float(params["value"])))
    if kind == "gaussian":
        cx, cy = params.get("center", (lx / 2, ly / 2))
        w = params["width"]
        vals = np.exp(-(((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * w**2)))
    elif kind == "two_bump":
        (c1x, c1y), w1 = params["center1"], params["width1"]
        (c2x, c2y), w2 = params["center2"], params["width2"]
        vals = params.get("ratio", 1.0) * np.exp(
            -(((X - c1x) ** 2 + (Y - c1y) ** 2) / (2.0 * w1**2))
        ) + np.exp(-(((X - c2x) ** 2 + (Y - c2y) ** 2) / (2.0 * w2**2)))
    else:
        raise ValueError(f"unknown rectangle initial kind {kind!r}")
    f = Field(hx, hy, vals)
    f.values *= params["mass"] / f.mass()
    return f
