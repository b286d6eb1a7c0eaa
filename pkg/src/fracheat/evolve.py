"""Strang-split time integration of du/dt + (-Lap)^alpha u + t^beta u^p = 0.

Both substeps are exact: diffusion is the spectral semigroup and absorption
is the closed-form flow of y' + t^beta y^p = 0, so spatially constant data
follow the flat solution to machine precision and the splitting is
second order in the step size.  A graded mesh concentrates steps near t0
to resolve the t^beta weight for beta < 0.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernel import scaled_kernel
from .params import maximal_flat_solution
from .spectral import Field, heat_semigroup_step

__all__ = [
    "TimeMesh",
    "Trajectory",
    "NegativityAbort",
    "NonFiniteAbort",
    "MonotonicityViolation",
    "absorption_step_exact",
    "strang_step",
    "evolve",
    "duhamel_residual",
    "dirac_family_run",
    "short_time_constant",
    "barrier_check",
    "barrier_w_shape",
    "default_grading",
]

NEGATIVITY_TOL = 1e-10  # relative to current max; worse than this aborts
MONOTONICITY_TOL = 1e-6


class NegativityAbort(RuntimeError):
    def __init__(self, step, worst):
        super().__init__(f"negative values beyond tolerance at step {step}: {worst:.3e}")
        self.step = step


class NonFiniteAbort(RuntimeError):
    def __init__(self, step):
        super().__init__(f"non-finite values at step {step}")
        self.step = step


class MonotonicityViolation(RuntimeError):
    def __init__(self, k_low, k_high, worst):
        super().__init__(
            f"u_k ordering violated between k={k_low} and k={k_high} "
            f"(worst relative excess {worst:.3e})"
        )
        self.k_pair = (k_low, k_high)


def default_grading(beta):
    """Grading exponent equidistributing the t^beta weight per step."""
    return max(1.0, 2.0 / (1.0 + beta))


@dataclass(frozen=True)
class TimeMesh:
    t0: float
    T: float
    K: int
    gamma: float = 1.0

    def __post_init__(self):
        if self.t0 <= 0.0 or self.T <= self.t0:
            raise ValueError("need 0 < t0 < T")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")

    @property
    def nodes(self):
        j = np.arange(self.K + 1)
        return self.t0 + (self.T - self.t0) * (j / self.K) ** self.gamma


@dataclass
class Trajectory:
    """Stored snapshots plus per-step diagnostics of one run."""

    params: object
    mesh: TimeMesh
    snapshot_times: np.ndarray
    snapshots: list  # Fields, aligned with snapshot_times
    diag_times: np.ndarray = field(default=None, repr=False)
    diag_mass: np.ndarray = field(default=None, repr=False)
    diag_max: np.ndarray = field(default=None, repr=False)
    diag_min: np.ndarray = field(default=None, repr=False)
    absorbed_mass: float = 0.0

    def field_at(self, t):
        i = int(np.argmin(np.abs(self.snapshot_times - t)))
        if abs(self.snapshot_times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot stored at t={t}; nearest is {self.snapshot_times[i]}")
        return self.snapshots[i]

    @property
    def final(self):
        return self.snapshots[-1]


def _clamp(values, step):
    if not np.all(np.isfinite(values)):
        raise NonFiniteAbort(step)
    peak = values.max(initial=0.0)
    tol = NEGATIVITY_TOL * max(peak, 1e-300)
    worst = values.min()
    if worst < -tol:
        raise NegativityAbort(step, worst)
    if worst < 0.0:
        values = np.where(values < 0.0, 0.0, values)
    return values


def _time_weight(t_a, t_b, beta):
    # Delta = int_{t_a}^{t_b} s^beta ds
    if beta == 0.0:
        return t_b - t_a
    if beta == -1.0:
        raise ValueError("beta = -1 not admissible")
    return (t_b ** (beta + 1.0) - t_a ** (beta + 1.0)) / (beta + 1.0)


def absorption_step_exact(fld, t_a, t_b, beta, p):
    """Pointwise exact flow of y' + t^beta y^p = 0 over [t_a, t_b].

    p > 1 keeps zeros at zero; p < 1 continues trajectories hitting zero
    by the absorbing state 0; p = 1 is the exponential factor.
    """
    if t_b < t_a or t_a < 0.0:
        raise ValueError("need 0 <= t_a <= t_b")
    if t_a == 0.0 and beta < 0.0:
        raise ValueError("t_a must be positive when beta < 0")
    u = fld.values
    if u.min() < 0.0:
        raise ValueError("absorption step requires a nonnegative field (clamp first)")
    if t_b == t_a:
        return fld.copy()
    delta = _time_weight(t_a, t_b, beta)
    if p == 1.0:
        return Field(fld.grid, u * math.exp(-delta))
    pos = u > 0.0
    out = np.zeros_like(u)
    if p > 1.0:
        out[pos] = (u[pos] ** (1.0 - p) + (p - 1.0) * delta) ** (-1.0 / (p - 1.0))
    else:
        base = u[pos] ** (1.0 - p) - (1.0 - p) * delta
        out_pos = np.zeros_like(base)
        alive = base > 0.0
        out_pos[alive] = base[alive] ** (1.0 / (1.0 - p))
        out[pos] = out_pos
    return Field(fld.grid, out)


def _absorption_rk4(fld, t_a, t_b, spec, substeps=16):
    """Generic RK4 substep for non-power-law absorption (no exactness claim)."""
    u = fld.values.copy()
    ts = np.linspace(t_a, t_b, substeps + 1)
    for a, b in zip(ts[:-1], ts[1:]):
        dt = b - a
        rhs = lambda t, y: -(t**spec.beta) * spec.g_of(np.maximum(y, 0.0))
        k1 = rhs(a, u)
        k2 = rhs(a + dt / 2.0, u + dt / 2.0 * k1)
        k3 = rhs(a + dt / 2.0, u + dt / 2.0 * k2)
        k4 = rhs(b, u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Field(fld.grid, np.maximum(u, 0.0))


def strang_step(
    fld,
    t_a,
    t_b,
    params,
    absorption_on=True,
    diffusion_on=True,
    splitting="absorption-outer",
    absorption_spec=None,
):
    """One splitting step over [t_a, t_b]; absorption outermost by default
    so that spatially constant states remain exact."""
    t_m = 0.5 * (t_a + t_b)
    tau = t_b - t_a

    def absorb(f, a, b):
        if not absorption_on:
            return f
        if absorption_spec is not None and not absorption_spec.is_power_law:
            return _absorption_rk4(f, a, b, absorption_spec)
        return absorption_step_exact(f, a, b, params.beta, params.p)

    def diffuse(f, dt):
        if not diffusion_on or dt == 0.0:
            return f
        return heat_semigroup_step(f, dt, params.alpha)

    if splitting == "absorption-outer":
        f = absorb(fld, t_a, t_m)
        f = diffuse(f, tau)
        return absorb(f, t_m, t_b)
    if splitting == "diffusion-outer":
        f = diffuse(fld, tau / 2.0)
        f = Field(f.grid, _clamp(f.values, step=-1))
        f = absorb(f, t_a, t_b)
        return diffuse(f, tau / 2.0)
    raise ValueError(f"unknown splitting {splitting!r}")


def _pick_snapshot_indices(n_nodes, max_snapshots):
    if n_nodes <= max_snapshots:
        return np.arange(n_nodes)
    idx = np.unique(np.round(np.linspace(0, n_nodes - 1, max_snapshots)).astype(int))
    return idx


def evolve(
    initial,
    mesh,
    params,
    absorption_on=True,
    splitting="absorption-outer",
    max_snapshots=65,
    snapshot_times=None,
    absorption_spec=None,
):
    """Integrate over the graded mesh, collecting snapshots and diagnostics.

    Aborts with NegativityAbort / NonFiniteAbort naming the step index.
    """
    nodes = mesh.nodes
    keep = set(_pick_snapshot_indices(len(nodes), max_snapshots).tolist())
    if snapshot_times is not None:
        for t in snapshot_times:
            keep.add(int(np.argmin(np.abs(nodes - t))))
    u = Field(initial.grid, _clamp(initial.values.copy(), step=0))
    mass0 = u.mass
    snaps, stimes = [], []
    d_t, d_mass, d_max, d_min = [], [], [], []

    def record(j, f):
        d_t.append(nodes[j])
        d_mass.append(f.mass)
        d_max.append(float(f.values.max()))
        d_min.append(float(f.values.min()))
        if j in keep:
            snaps.append(f.copy())
            stimes.append(nodes[j])

    record(0, u)
    for j in range(mesh.K):
        u = strang_step(
            u,
            nodes[j],
            nodes[j + 1],
            params,
            absorption_on=absorption_on,
            splitting=splitting,
            absorption_spec=absorption_spec,
        )
        u = Field(u.grid, _clamp(u.values, step=j + 1))
        record(j + 1, u)
    return Trajectory(
        params=params,
        mesh=mesh,
        snapshot_times=np.asarray(stimes),
        snapshots=snaps,
        diag_times=np.asarray(d_t),
        diag_mass=np.asarray(d_mass),
        diag_max=np.asarray(d_max),
        diag_min=np.asarray(d_min),
        absorbed_mass=mass0 - u.mass,
    )


@dataclass
class DuhamelStats:
    times: np.ndarray
    max_residual: np.ndarray
    l1_residual: np.ndarray
    max_field: np.ndarray
    quadrature_warning: bool

    @property
    def relative_max(self):
        return self.max_residual / self.max_field


def duhamel_residual(traj, k_mass, profile, checkpoints=None, absorption_on=True):
    """Residual of the integral representation of the solution:

        R(t) = u(t) - k Gamma(t) + int_{t0}^{t} S(t-s)[ s^beta u(s)^p ] ds,

    with S the linear semigroup, time integral by trapezoid over stored
    snapshots.  A warning flag is set when halving the snapshot set moves
    the residual by more than 25%.
    """
    times = traj.snapshot_times
    if len(times) < 32:
        raise ValueError("need at least 32 stored snapshots for time quadrature")
    if checkpoints is None:
        checkpoints = [times[len(times) // 2], times[-1]]
    params = traj.params
    grid = traj.snapshots[0].grid
    coords = np.abs(grid.axis_coords) if grid.dim == 1 else grid.radius()

    def residual_at(t_c, stride):
        sel = [i for i in range(0, len(times)) if times[i] <= t_c * (1 + 1e-12)]
        sel_str = sel[::stride]
        if sel_str[-1] != sel[-1]:
            sel_str = sel_str + [sel[-1]]
        u_c = traj.field_at(times[sel[-1]])
        lin = k_mass * scaled_kernel(profile, times[sel[-1]], coords)
        q = np.zeros(grid.shape)
        if absorption_on:
            ts = times[sel_str]
            integrands = []
            for i in sel_str:
                s = times[i]
                us = traj.snapshots[i]
                src = Field(grid, (s**params.beta) * us.values**params.p)
                integrands.append(
                    heat_semigroup_step(src, times[sel[-1]] - s, params.alpha).values
                )
            # trapezoid weights on the (possibly nonuniform) snapshot times
            w = np.empty(len(ts))
            dt = np.diff(ts)
            w[0] = dt[0] / 2.0
            w[-1] = dt[-1] / 2.0
            w[1:-1] = (dt[:-1] + dt[1:]) / 2.0
            for wi, gi in zip(w, integrands):
                q += wi * gi
        return u_c.values - lin + q, u_c.values.max()

    max_r, l1_r, max_f, tcs = [], [], [], []
    warn = False
    for t_c in checkpoints:
        r_full, peak = residual_at(t_c, 1)
        r_half, _ = residual_at(t_c, 2)
        a, b = np.abs(r_full).max(), np.abs(r_half).max()
        if a > 0 and abs(a - b) > 0.25 * a:
            warn = True
        tcs.append(t_c)
        max_r.append(a)
        l1_r.append(float(np.abs(r_full).sum() * grid.cell_volume))
        max_f.append(peak)
    if warn:
        warnings.warn("Duhamel time quadrature under-resolved (>25% change on halving)")
    return DuhamelStats(
        np.asarray(tcs), np.asarray(max_r), np.asarray(l1_r), np.asarray(max_f), warn
    )


@dataclass
class FamilyResult:
    k_list: list
    trajectories: dict  # k -> Trajectory
    saturation: list  # per consecutive pair at final time
    u_inf_estimate: Field
    monotone: bool


def dirac_family_run(k_list, params, grid, mesh, profile, t0=None, tail_tol=None, **evolve_kw):
    """Evolve the Dirac family u_k for increasing masses k and estimate u_inf.

    Verifies the pointwise ordering u_{k_i} <= u_{k_{i+1}} at every stored
    snapshot (raises MonotonicityViolation otherwise) and reports the
    saturation metric between consecutive runs at the final time.
    """
    from .kernel import dirac_approx

    k_list = list(k_list)
    if any(b <= a for a, b in zip(k_list[:-1], k_list[1:])):
        raise ValueError("k_list must be strictly increasing")
    t_start = mesh.t0 if t0 is None else t0
    approx_kw = {} if tail_tol is None else {"tail_tol": tail_tol}
    trajs = {}
    for k in k_list:
        init = dirac_approx(grid, k, t_start, profile, **approx_kw)
        trajs[k] = evolve(init, mesh, params, **evolve_kw)
    for k_lo, k_hi in zip(k_list[:-1], k_list[1:]):
        lo, hi = trajs[k_lo], trajs[k_hi]
        for t, f_lo, f_hi in zip(lo.snapshot_times, lo.snapshots, hi.snapshots):
            excess = (f_lo.values - f_hi.values).max() / max(f_lo.values.max(), 1e-300)
            if excess > MONOTONICITY_TOL:
                raise MonotonicityViolation(k_lo, k_hi, excess)
    saturation = []
    for k_lo, k_hi in zip(k_list[:-1], k_list[1:]):
        a = trajs[k_lo].final.values
        b = trajs[k_hi].final.values
        saturation.append(float(np.abs(b - a).max() / b.max()))
    return FamilyResult(k_list, trajs, saturation, trajs[k_list[-1]].final, True)


def short_time_constant(params, k, t_list, grid, profile, absorption_on=True, steps=160):
    """Table of ratios t^(N/2a) u_k(t, 0) / k and a Richardson limit.

    The leading short-time correction decays like t^sigma0 with
    sigma0 = 1 + beta - N(p-1)/(2a); pairwise Richardson in that exponent
    extrapolates the ratio to t -> 0.
    """
    from .kernel import dirac_approx

    t_list = sorted(float(t) for t in t_list)
    a, N = params.alpha, params.dim
    width = t_list[0] ** (1.0 / (2.0 * a))
    if width < 4.0 * grid.h:
        raise ValueError(
            f"kernel unresolved: width {width:.3g} at t={t_list[0]} is below 4h={4*grid.h:.3g}"
        )
    t0 = t_list[0] / 8.0
    # the start only needs the kernel representable, not peak-accurate
    if t0 ** (1.0 / (2.0 * a)) < 2.0 * grid.h:
        t0 = (2.0 * grid.h) ** (2.0 * a)
    if t0 >= t_list[0]:
        raise ValueError("cannot place start time below the requested t values")
    mesh = TimeMesh(t0, t_list[-1], steps, default_grading(params.beta))
    init = dirac_approx(grid, k, t0, profile)
    traj = evolve(
        init, mesh, params, absorption_on=absorption_on, snapshot_times=t_list,
        max_snapshots=48,
    )
    center = tuple(g // 2 for g in grid.shape)
    ratios = []
    for t in t_list:
        i = int(np.argmin(np.abs(traj.snapshot_times - t)))
        t_snap = traj.snapshot_times[i]
        u0 = traj.snapshots[i].values[center]
        ratios.append((t_snap, t_snap ** (N / (2.0 * a)) * u0 / k))
    sigma0 = 1.0 + params.beta - N * (params.p - 1.0) / (2.0 * a)
    if not absorption_on or sigma0 <= 0.0:
        sigma0 = 1.0
    # pairwise Richardson, ascending pairs; last pair (smallest t) wins
    ts = np.array([t for t, _ in ratios])
    rs = np.array([r for _, r in ratios])
    order = np.argsort(ts)[::-1]
    ts, rs = ts[order], rs[order]
    limit = rs[-1]
    for i in range(len(ts) - 1):
        theta = (ts[i + 1] / ts[i]) ** sigma0
        limit = (rs[i + 1] - theta * rs[i]) / (1.0 - theta)
    return ratios, float(limit)


def barrier_w_shape(s, dim, alpha):
    """Supersolution shape w(s) = ln(e + s^2) / (1 + s^(N+2a))."""
    s = np.asarray(s, dtype=float)
    return np.log(np.e + s**2) / (1.0 + s ** (dim + 2.0 * alpha))


def barrier_check(traj, kind, profile=None, k=None, lam=None, region_radius=None):
    """Margins against the comparison barriers.

    Upper barriers ("kernel", "flat", "w_lambda"): returns the max over
    stored snapshots of (u - barrier)/max(u).  Lower envelope
    ("lower_envelope"): returns the per-snapshot largest constants c with
    c * envelope <= u over the region |x| <= region_radius.
    """
    params = traj.params
    grid = traj.snapshots[0].grid
    coords = np.abs(grid.axis_coords) if grid.dim == 1 else grid.radius()
    a, N = params.alpha, params.dim

    if kind == "lower_envelope":
        consts = []
        for t, f in zip(traj.snapshot_times, traj.snapshots):
            s = coords * t ** (-1.0 / (2.0 * a))
            env = t ** (-(1.0 + params.beta) / (params.p - 1.0)) / (
                1.0 + s ** (N + 2.0 * a)
            )
            mask = (
                coords <= region_radius if region_radius is not None else np.ones_like(env, bool)
            )
            consts.append((float(t), float(np.min(f.values[mask] / env[mask]))))
        return consts

    margin = -np.inf
    for t, f in zip(traj.snapshot_times, traj.snapshots):
        if kind == "kernel":
            if profile is None or k is None:
                raise ValueError("kernel barrier needs profile and k")
            bar = k * scaled_kernel(profile, t, coords)
        elif kind == "flat":
            bar = np.full(grid.shape, maximal_flat_solution(params, t))
        elif kind == "w_lambda":
            if lam is None:
                raise ValueError("w_lambda barrier needs lam")
            s = coords * t ** (-1.0 / (2.0 * a))
            bar = lam * t ** (-(1.0 + params.beta) / (params.p - 1.0)) * barrier_w_shape(
                s, N, a
            )
        else:
            raise ValueError(f"unknown barrier kind {kind!r}")
        margin = max(margin, float((f.values - bar).max() / f.values.max()))
    return margin
