"""Desk-scale verification suite.

Each criterion function takes a shared :class:`SuiteContext` and returns a
:class:`CriterionResult` with one measured value per check, the tolerance it
was tested against, and how the reference value was obtained.  The suite is
designed to finish on a commodity machine in well under fifteen minutes.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolve import TimeMesh, absorption_step_exact, barrier_check, evolve, short_time_constant
from .kernel import (
    dirac_approx,
    gamma_radial,
    image_tail_field,
    kernel_profile,
    marcinkiewicz_quasinorm,
    scaled_kernel,
)
from .params import ModelParams
from .selfsim import (
    Profile,
    find_lambda_threshold,
    flat_profile_value,
    flatness_gap,
    rescale_profile,
    selfsim_residual,
    supersolution_check_w,
)
from .spectral import Field, build_grid, heat_semigroup_step


@dataclass
class Check:
    """One measured quantity with the tolerance it was tested against."""

    label: str
    measured: float
    tolerance: float
    passed: bool
    oracle: str  # how the reference value was obtained


@dataclass
class CriterionResult:
    number: int
    name: str
    checks: list
    runtime: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        failed = [c for c in self.checks if not c.passed]
        worst = failed[0] if failed else max(
            self.checks, key=lambda c: abs(c.measured) / max(c.tolerance, 1e-300))
        return (
            f"criterion {self.number:2d} [{status}] {self.name}: "
            f"{worst.label}={worst.measured:.3g} (tol {worst.tolerance:.3g}, "
            f"{len(self.checks)} checks, {self.runtime:.1f}s)"
        )


@dataclass
class SuiteContext:
    """Grids, cached kernel profiles and resolution knobs shared by criteria."""

    quick: bool = False
    _profiles: dict = field(default_factory=dict)
    _grids: dict = field(default_factory=dict)

    def profile(self, alpha, dim):
        key = (alpha, dim)
        if key not in self._profiles:
            self._profiles[key] = kernel_profile(alpha, dim)
        return self._profiles[key]

    def grid(self, dim):
        if dim not in self._grids:
            self._grids[dim] = build_grid(1, 200.0, 4096) if dim == 1 else build_grid(2, 60.0, 512)
        return self._grids[dim]

    def steps(self, n):
        return max(32, n // 2) if self.quick else n


def _check(label, measured, tolerance, oracle, ok=None):
    if ok is None:
        ok = abs(measured) <= tolerance
    return Check(label, float(measured), float(tolerance), bool(ok), oracle)


def _timed(number, name):
    def wrap(fn):
        def run(ctx):
            t0 = time.perf_counter()
            try:
                checks = fn(ctx)
            except Exception as exc:  # an abort fails the criterion, not the suite
                checks = [Check(f"aborted: {type(exc).__name__}: {exc}", np.nan, 0.0, False,
                                "run aborted")]
            return CriterionResult(number, name, checks, time.perf_counter() - t0)

        run.number = number
        run.criterion_name = name
        return run

    return wrap


# -- 1: kernel quadrature against closed forms -------------------------------

@_timed(1, "kernel oracle")
def criterion_kernel_oracle(ctx):
    checks = []
    prof = ctx.profile(0.5, 1)
    for r in (0.0, 1.0, 5.0, 20.0):
        exact = 1.0 / (np.pi * (1.0 + r * r))
        rel = abs(prof.evaluate(r) / exact - 1.0)
        checks.append(_check(f"a=1/2 N=1 r={r:g}", rel, 1e-5, "closed form 1/(pi(1+r^2))"))
    prof2 = ctx.profile(0.5, 2)
    for r in (0.0, 1.0, 5.0, 20.0):
        exact = (1.0 + r * r) ** -1.5 / (2.0 * np.pi)
        rel = abs(prof2.evaluate(r) / exact - 1.0)
        checks.append(_check(f"a=1/2 N=2 r={r:g}", rel, 1e-5, "closed form (1+r^2)^(-3/2)/2pi"))
    for N in (1, 2):
        for r in (0.0, 1.0, 2.0, 4.0):
            val, _ = gamma_radial(1.0, N, r)
            exact = (4.0 * np.pi) ** (-N / 2.0) * np.exp(-r * r / 4.0)
            rel = abs(val / exact - 1.0)
            checks.append(_check(f"a=1 N={N} r={r:g}", rel, 1e-6, "Gaussian closed form"))
    return checks


# -- 2: tail-bound constant stable under range doubling ----------------------

@_timed(2, "kernel tail bound")
def criterion_kernel_bound(ctx):
    checks = []
    for N in (1, 2):
        for a in (0.25, 0.5, 0.75):
            prof = ctx.profile(a, N)
            r, v = prof.radii, prof.values * (1.0 + prof.radii ** (N + 2.0 * a))
            s_half = float(v[r <= 80.0].max())
            s_full = float(v[r <= 160.0].max())
            rel = abs(s_full - s_half) / s_half
            ok = rel <= 0.05 and np.isfinite(s_full)
            checks.append(
                _check(f"a={a} N={N} sup drift", rel, 0.05, "self-consistency under range doubling", ok)
            )
    return checks


# -- 3: mass conservation and semigroup property -----------------------------

@_timed(3, "mass and semigroup")
def criterion_mass_semigroup(ctx):
    checks = []
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 1.5, 1)
    init = dirac_approx(g, 2.0, 0.1, prof)
    traj = evolve(init, TimeMesh(0.1, 1.0, ctx.steps(128), 1.0), par, absorption_on=False,
                  max_snapshots=33)
    masses = np.array([f.mass for f in traj.snapshots])
    drift = float(np.abs(masses / masses[0] - 1.0).max())
    checks.append(_check("mass drift (absorption off)", drift, 1e-4, "exact conservation"))

    # spectral composition: two short steps equal one long step
    f = dirac_approx(g, 1.0, 0.2, prof, tail_tol=1e-5)
    two = heat_semigroup_step(heat_semigroup_step(f, 0.15, 0.5), 0.25, 0.5)
    one = heat_semigroup_step(f, 0.4, 0.5)
    err = float(np.abs(two.values - one.values).max() / np.abs(one.values).max())
    checks.append(_check("semigroup composition (spectral)", err, 1e-12, "operator identity"))

    # continuum convolution: Gamma(0.2) * Gamma(0.3) = Gamma(0.5)
    # periodized samples on both sides, else box truncation of the heavy
    # tails dominates the comparison
    a_f = dirac_approx(g, 1.0, 0.2, prof, tail_tol=1e-4).values
    b_f = dirac_approx(g, 1.0, 0.3, prof, tail_tol=1e-4).values
    conv = np.fft.irfft(np.fft.rfft(a_f) * np.fft.rfft(b_f), n=g.M) * g.cell_volume
    conv = np.fft.fftshift(conv)
    target = dirac_approx(g, 1.0, 0.5, prof, tail_tol=1e-4).values
    err = float(np.abs(conv - target).max() / target.max())
    checks.append(_check("semigroup composition (convolution)", err, 1e-5, "independent quadrature values"))
    return checks


# -- 4: smoothing constant over a decade of times ----------------------------

@_timed(4, "smoothing constant")
def criterion_smoothing(ctx):
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 1.5, 1)
    k = 3.0
    times = list(np.geomspace(0.1, 1.0, 9))
    traj = evolve(dirac_approx(g, k, 0.1, prof), TimeMesh(0.1, 1.0, ctx.steps(160), 1.0), par,
                  absorption_on=False, snapshot_times=times, max_snapshots=64)
    ratios = []
    for t in times:
        f = traj.field_at(min(traj.snapshot_times, key=lambda s: abs(s - t)))
        ratios.append(float(f.values.max()) * t / k)  # N/(2a) = 1 here
    spread = (max(ratios) - min(ratios)) / np.mean(ratios)
    return [_check("max u * t^(N/2a) / k spread", spread, 0.02, "scale invariance of the kernel")]


# -- 5: kernel and flat-solution upper barriers ------------------------------

@_timed(5, "comparison barriers")
def criterion_barriers(ctx):
    checks = []
    g = ctx.grid(2)
    prof = ctx.profile(0.5, 2)
    for p in (1.2, 1.4):
        par = ModelParams(0.5, 0.0, p, 2)
        traj = evolve(dirac_approx(g, 50.0, 0.25, prof), TimeMesh(0.25, 1.0, ctx.steps(96), 1.0),
                      par, max_snapshots=17)
        m_k = barrier_check(traj, "kernel", profile=prof, k=50.0)
        m_f = barrier_check(traj, "flat")
        checks.append(_check(f"p={p} kernel barrier margin", m_k, 1e-3, "periodized kernel bound",
                             m_k <= 1e-3))
        checks.append(_check(f"p={p} flat barrier margin", m_f, 1e-3, "maximal flat solution",
                             m_f <= 1e-3))
    return checks


# -- 6: scaling covariance ---------------------------------------------------

@_timed(6, "scaling covariance")
def criterion_scaling(ctx):
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 1.5, 1)
    lam, k = 2.0, 5.0
    e = 2.0 * par.alpha * (1.0 + par.beta) / (par.p - 1.0)
    k_b = lam ** (par.dim - e) * k
    steps = ctx.steps(160)
    traj_a = evolve(dirac_approx(g, k, 0.1, prof), TimeMesh(0.1, 1.0, steps, 1.0), par,
                    snapshot_times=[0.25, 1.0], max_snapshots=40)
    traj_b = evolve(dirac_approx(g, k_b, 0.2, prof, tail_tol=1e-5),
                    TimeMesh(0.2, 2.0, steps, 1.0), par,
                    snapshot_times=[0.5, 2.0], max_snapshots=40)
    x = g.axis_coords
    inner = np.abs(x) <= 40.0
    checks = []
    for t, t_b in ((0.25, 0.5), (1.0, 2.0)):
        u_a = traj_a.field_at(min(traj_a.snapshot_times, key=lambda s: abs(s - t))).values
        u_b = traj_b.field_at(min(traj_b.snapshot_times, key=lambda s: abs(s - t_b))).values
        u_b_scaled = lam**e * np.interp(lam * x[inner], x, u_b)
        err = np.abs(u_a[inner] - u_b_scaled).max() / np.abs(u_a[inner]).max()
        checks.append(_check(f"lambda=2 mismatch at t={t}", err, 1e-2, "covariance of the equation"))
    return checks


# -- 7: regime trichotomy ----------------------------------------------------

@_timed(7, "regime trichotomy")
def criterion_trichotomy(ctx):
    checks = []
    # (a) diffusive: center value keeps growing with the mass
    g1 = ctx.grid(1)
    prof1 = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 0.7, 1)
    centers = []
    for k in (1.0, 4.0, 16.0, 64.0):
        traj = evolve(dirac_approx(g1, k, 0.1, prof1), TimeMesh(0.1, 1.0, ctx.steps(128), 1.0),
                      par, max_snapshots=2)
        centers.append(float(traj.final.values[g1.M // 2]))
    ratios = [hi / lo for lo, hi in zip(centers, centers[1:])]
    for i, r in enumerate(ratios):
        checks.append(_check(f"(a) center ratio step {i}", r, 1.5, "mass-monotone family",
                             r >= 1.5))

    g2 = ctx.grid(2)
    prof2 = ctx.profile(0.5, 2)

    # (b) flat absorption: gap to the flat solution closes as k doubles
    par = ModelParams(0.5, 0.0, 1.2, 2)
    a_flat = flat_profile_value(par)
    t_end = 4.0
    u_flat = a_flat * t_end ** (-(1.0 + par.beta) / (par.p - 1.0))
    region = g2.radius() <= 1.5 * t_end
    gaps = []
    for j in range(5):
        k = 6.25e8 * 2**j
        traj = evolve(dirac_approx(g2, k, 0.25, prof2), TimeMesh(0.25, t_end, ctx.steps(192), 1.0),
                      par, max_snapshots=2)
        gaps.append(float(np.abs(traj.final.values[region] - u_flat).max() / u_flat))
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    checks.append(_check("(b) gaps strictly decreasing", float(decreasing), 1.0,
                         "flat-solution limit", decreasing))
    checks.append(_check("(b) final flatness gap", gaps[-1], 0.15, "flat-solution limit"))

    # (c) very singular: profile stays non-flat, tail keeps the kernel exponent
    par = ModelParams(0.5, 0.0, 1.4, 2)
    r = g2.radius()
    fit_mask = (r >= 5.0) & (r <= 18.0)
    log_r = np.log(r[fit_mask])
    for k in (100.0, 400.0, 1600.0):
        traj = evolve(dirac_approx(g2, k, 0.25, prof2), TimeMesh(0.25, 1.0, ctx.steps(96), 1.0),
                      par, max_snapshots=2)
        prof_v = rescale_profile(traj.final, 1.0, par, g2)
        gap = flatness_gap(prof_v)
        checks.append(_check(f"(c) k={k:g} flatness gap", gap, 0.2, "flat constant", gap >= 0.2))
        u_free = traj.final.values - k * image_tail_field(g2, prof2, 1.0)
        slope = np.polyfit(log_r, np.log(u_free[fit_mask]), 1)[0]
        dev = abs(slope + (par.dim + 2.0 * par.alpha))
        checks.append(_check(f"(c) k={k:g} tail slope deviation", dev, 0.15,
                             "kernel tail exponent, wrap-around subtracted"))
    return checks


# -- 8: short-time center constant -------------------------------------------

@_timed(8, "short-time constant")
def criterion_short_time(ctx):
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 1.5, 1)
    t_list = [0.2, 0.4, 0.8, 1.6]
    lims = {}
    for k in (1.0, 8.0):
        _, lims[k] = short_time_constant(par, k, t_list, g, prof, steps=ctx.steps(160))
    rel = abs(lims[8.0] - lims[1.0]) / abs(lims[1.0])
    checks = [_check("k=1 vs k=8 extrapolated constants", rel, 0.05, "Richardson in t^sigma0")]
    _, lim_off = short_time_constant(par, 1.0, t_list, g, prof, absorption_on=False,
                                     steps=ctx.steps(160))
    g0, _ = gamma_radial(0.5, 1, 0.0)
    checks.append(_check("absorption-off limit vs kernel center", abs(lim_off - g0), 1e-3,
                         "independent quadrature"))
    return checks


# -- 9: self-similar profile residual ----------------------------------------

@_timed(9, "self-similar residual")
def criterion_selfsim_residual(ctx):
    g2 = ctx.grid(2)
    prof2 = ctx.profile(0.5, 2)
    par = ModelParams(0.5, 0.0, 1.4, 2)
    t_end = 8.0
    traj = evolve(dirac_approx(g2, 1e7, 0.25, prof2), TimeMesh(0.25, t_end, ctx.steps(224), 1.0),
                  par, max_snapshots=2)
    eta_grid = build_grid(2, g2.L / t_end, g2.M)
    prof_v = rescale_profile(traj.final, t_end, par, eta_grid)
    res, _ = selfsim_residual(prof_v, inner_fraction=0.8)
    checks = [_check("largest-k profile residual", res, 5e-2, "spectral profile operator")]
    flat = Profile(par, Field(eta_grid, np.full(eta_grid.shape, flat_profile_value(par))), t_end)
    res_flat, _ = selfsim_residual(flat)
    checks.append(_check("flat constant residual", res_flat, 1e-12, "algebraic identity"))
    return checks


# -- 10: barrier amplitude threshold -----------------------------------------

@_timed(10, "barrier threshold")
def criterion_barrier_threshold(ctx):
    par = ModelParams(0.5, 0.0, 1.6, 1)
    g_hi = ctx.grid(1)
    g_lo = build_grid(1, 200.0, 2048)
    lam_hi = find_lambda_threshold(par, g_hi)
    lam_lo = find_lambda_threshold(par, g_lo)
    rel = abs(lam_hi - lam_lo) / lam_hi
    checks = [_check("threshold grid drift", rel, 0.10, "bisection on two grids")]
    vals = [supersolution_check_w(l, par, g_hi) for l in np.geomspace(lam_hi / 8, lam_hi * 8, 9)]
    mono = all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    checks.append(_check("min S[w_lam] monotone in lam", float(mono), 1.0,
                         "pointwise operator scan", mono))
    return checks


# -- 11: splitting order and exact substeps ----------------------------------

@_timed(11, "splitting order")
def criterion_splitting(ctx):
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.0, 1.5, 1)
    init = dirac_approx(g, 2.0, 0.5, prof, tail_tol=1e-4)
    finals = {}
    for steps in (40, 80, 160):
        finals[steps] = evolve(init, TimeMesh(0.5, 1.0, steps, 1.0), par, max_snapshots=2).final.values
    e_coarse = np.abs(finals[40] - finals[80]).max()
    e_fine = np.abs(finals[80] - finals[160]).max()
    factor = e_coarse / e_fine
    checks = [_check("Richardson factor", factor, 4.5, "self-convergence", 3.5 <= factor <= 4.5)]

    # flat initial data must track the flat solution exactly
    a_flat = flat_profile_value(par)
    flat0 = Field(g, np.full(g.shape, a_flat * 0.5 ** (-(1 + par.beta) / (par.p - 1))))
    traj = evolve(flat0, TimeMesh(0.5, 1.0, 16, 1.0), par, max_snapshots=2)
    target = a_flat * 1.0 ** (-(1 + par.beta) / (par.p - 1))
    err = float(np.abs(traj.final.values / target - 1.0).max())
    checks.append(_check("flat-solution tracking", err, 1e-9, "closed-form flat solution"))

    # absorption substep against a high-order ODE integrator
    y = Field(build_grid(1, 10.0, 64), np.linspace(0.5, 4.0, 64))
    exact = absorption_step_exact(y, 0.3, 0.9, 0.5, 1.7).values
    yy = y.values.copy()
    n_rk, h = 2000, 0.6 / 2000
    t = 0.3
    for _ in range(n_rk):
        k1 = -(t**0.5) * yy**1.7
        k2 = -((t + h / 2) ** 0.5) * np.clip(yy + h / 2 * k1, 0, None) ** 1.7
        k3 = -((t + h / 2) ** 0.5) * np.clip(yy + h / 2 * k2, 0, None) ** 1.7
        k4 = -((t + h) ** 0.5) * np.clip(yy + h * k3, 0, None) ** 1.7
        yy = yy + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    err = float(np.abs(exact - yy).max())
    checks.append(_check("absorption substep vs RK4", err, 1e-9, "Runge-Kutta oracle"))
    return checks


# -- 12: weak-norm linearity in the mass -------------------------------------

@_timed(12, "weak-norm linearity")
def criterion_weak_norm(ctx):
    g = ctx.grid(1)
    prof = ctx.profile(0.5, 1)
    par = ModelParams(0.5, 0.5, 1.5, 1)
    kappa = par.p_star
    cells = np.full(g.M, g.cell_volume)
    norms = {}
    for k in (1.0, 2.0, 4.0):
        traj = evolve(dirac_approx(g, k, 0.1, prof), TimeMesh(0.1, 1.0, ctx.steps(96), 1.0), par,
                      absorption_on=False, max_snapshots=17)
        norms[k] = max(
            t**par.beta * marcinkiewicz_quasinorm(f.values, cells, kappa)
            for t, f in zip(traj.snapshot_times, traj.snapshots)
        )
    checks = []
    for k in (2.0, 4.0):
        rel = abs(norms[k] / (k * norms[1.0]) - 1.0)
        checks.append(_check(f"quasi-norm k={k:g} vs k * (k=1)", rel, 0.05,
                             "degree-1 homogeneity"))
    return checks


ALL_CRITERIA = [
    criterion_kernel_oracle,
    criterion_kernel_bound,
    criterion_mass_semigroup,
    criterion_smoothing,
    criterion_barriers,
    criterion_scaling,
    criterion_trichotomy,
    criterion_short_time,
    criterion_selfsim_residual,
    criterion_barrier_threshold,
    criterion_splitting,
    criterion_weak_norm,
]


def run_suite(quick=False, workers=1, numbers=None):
    """Run the acceptance criteria and return results sorted by number."""
    ctx = SuiteContext(quick=quick)
    todo = [c for c in ALL_CRITERIA if numbers is None or c.number in numbers]
    # profile construction is cached but not concurrency-safe; warm it up front
    for a, N in ((0.5, 1), (0.5, 2)):
        ctx.profile(a, N)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: c(ctx), todo))
    else:
        results = [c(ctx) for c in todo]
    return sorted(results, key=lambda r: r.number)
