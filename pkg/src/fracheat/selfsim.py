"""Self-similar rescaling, profile-equation residual and tail diagnostics.

A snapshot u(t, .) is rescaled to the similarity variable,

    v(eta) = t^((1+beta)/(p-1)) u(t, t^(1/2a) eta),

which for the Dirac-family limit should approach a fixed profile solving

    (-Lap)^a v - (1/2a) grad(v).eta - ((1+beta)/(p-1)) v + v^p = 0.

The constant ((1+beta)/(p-1))^(1/(p-1)) solves this equation exactly; the
flatness gap measures the distance to it, and the tail fit probes the
|eta|^-(N+2a) decay of the non-flat profiles.
"""

from dataclasses import dataclass

import numpy as np
from scipy import interpolate

from .evolve import barrier_w_shape
from .spectral import Field, frac_laplacian, spectral_gradient_dot_x

__all__ = [
    "Profile",
    "flat_profile_value",
    "rescale_profile",
    "selfsim_residual",
    "tail_fit",
    "flatness_gap",
    "supersolution_operator",
    "supersolution_check_w",
    "find_lambda_threshold",
]

SUPSOL_TOL = 1e-8


def flat_profile_value(params):
    """The constant solution ((1+beta)/(p-1))^(1/(p-1)) of the profile equation."""
    if params.p <= 1.0:
        raise ValueError("flat profile requires p > 1")
    return ((1.0 + params.beta) / (params.p - 1.0)) ** (1.0 / (params.p - 1.0))


@dataclass
class Profile:
    """Rescaled self-similar candidate v(eta) with its source time."""

    params: object
    field: Field
    source_time: float

    @property
    def eta_grid(self):
        return self.field.grid


def rescale_profile(snapshot, t, params, eta_grid):
    """Sample v(eta) from a snapshot at time t onto the similarity grid."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    stretch = t ** (1.0 / (2.0 * params.alpha))
    x_needed = stretch * eta_grid.L / 2.0
    if x_needed > snapshot.grid.L / 2.0 + 1e-12:
        raise ValueError(
            f"eta box needs |x| up to {x_needed:.3g}, beyond the snapshot box "
            f"{snapshot.grid.L / 2:.3g}"
        )
    amp = t ** ((1.0 + params.beta) / (params.p - 1.0))
    x_src = snapshot.grid.axis_coords
    if snapshot.grid.dim == 1:
        x_tgt = stretch * eta_grid.axis_coords
        vals = np.interp(x_tgt, x_src, snapshot.values)
    else:
        spline = interpolate.RectBivariateSpline(x_src, x_src, snapshot.values, kx=3, ky=3)
        x_tgt = stretch * eta_grid.axis_coords
        vals = spline(x_tgt, x_tgt)
    return Profile(params, Field(eta_grid, amp * np.maximum(vals, 0.0)), t)


def _inner_mask(grid, fraction):
    r = np.abs(grid.axis_coords) if grid.dim == 1 else grid.radius()
    return r <= fraction * grid.L / 2.0


def selfsim_residual(profile, inner_fraction=0.8):
    """Normalized residual of the profile equation over the inner box."""
    params = profile.params
    v = profile.field
    lap = frac_laplacian(v, params.alpha)
    drift = spectral_gradient_dot_x(v)
    c = (1.0 + params.beta) / (params.p - 1.0)
    res = (
        lap.values
        - drift.values / (2.0 * params.alpha)
        - c * v.values
        + v.values**params.p
    )
    mask = _inner_mask(v.grid, inner_fraction)
    vmax_p = float((v.values**params.p).max())
    if vmax_p == 0.0:
        return 0.0, Field(v.grid, res)
    return float(np.abs(res[mask]).max() / vmax_p), Field(v.grid, res)


def tail_fit(profile, window):
    """Least-squares log-log slope of v over |eta| in ``window``.

    Returns (slope, log_correction_score); a positive score means dividing
    out ln(2+|eta|) improves the power-law fit (smaller residual sum).
    """
    r1, r2 = window
    grid = profile.eta_grid
    if r2 > 0.9 * grid.L / 2.0:
        raise ValueError("fit window must stay inside the inner 90% of the box")
    if r2 / r1 < 4.0:
        raise ValueError("fit window must span a factor >= 4 in radius")
    r = np.abs(grid.axis_coords) if grid.dim == 1 else grid.radius()
    mask = (r >= r1) & (r <= r2) & (profile.field.values > 0.0)
    if mask.sum() < 8:
        raise ValueError("degenerate fit window (too few positive samples)")
    lr = np.log(r[mask])
    lv = np.log(profile.field.values[mask])
    slope, _ = np.polyfit(lr, lv, 1)
    rss_plain = float(np.sum((lv - np.polyval(np.polyfit(lr, lv, 1), lr)) ** 2))
    lv_corr = lv - np.log(np.log(2.0 + r[mask]))
    rss_log = float(np.sum((lv_corr - np.polyval(np.polyfit(lr, lv_corr, 1), lr)) ** 2))
    score = (rss_plain - rss_log) / rss_plain if rss_plain > 0.0 else 0.0
    return float(slope), float(score)


def flatness_gap(profile, inner_fraction=0.5):
    """max |v - v_flat| / v_flat over the inner half of the eta box."""
    v_flat = flat_profile_value(profile.params)
    mask = _inner_mask(profile.eta_grid, inner_fraction)
    return float(np.abs(profile.field.values[mask] - v_flat).max() / v_flat)


def supersolution_operator(lam, params, eta_grid, inner_fraction=0.8):
    """Stationary operator applied to the barrier shape w at amplitude lam:

        S[w_lam] = (-Lap)^a w - (1/2a) w'(s) s - ((1+beta)/(p-1)) w + lam^(p-1) w^p

    evaluated spectrally on the eta grid; returns (min over the inner box,
    the operator field).
    """
    s = np.abs(eta_grid.axis_coords) if eta_grid.dim == 1 else eta_grid.radius()
    w = Field(eta_grid, barrier_w_shape(s, params.dim, params.alpha))
    lap = frac_laplacian(w, params.alpha)
    drift = spectral_gradient_dot_x(w)
    c = (1.0 + params.beta) / (params.p - 1.0)
    op = (
        lap.values
        - drift.values / (2.0 * params.alpha)
        - c * w.values
        + lam ** (params.p - 1.0) * w.values**params.p
    )
    mask = _inner_mask(eta_grid, inner_fraction)
    return float(op[mask].min()), Field(eta_grid, op)


def supersolution_check_w(lam, params, eta_grid, inner_fraction=0.8):
    """Minimum of S[w_lam]; nonnegative (within tolerance) means supersolution."""
    return supersolution_operator(lam, params, eta_grid, inner_fraction)[0]


def find_lambda_threshold(params, eta_grid, inner_fraction=0.8, rtol=1e-3):
    """Empirical threshold Lambda0_hat: smallest amplitude making w_lam a
    supersolution of the profile equation, located by bisection.

    Only meaningful in the very-singular regime p_dstar < p < p_star.
    """
    if not (params.p_dstar < params.p < params.p_star):
        raise ValueError("threshold search requires the very-singular regime")
    s = np.abs(eta_grid.axis_coords) if eta_grid.dim == 1 else eta_grid.radius()
    w_max = float(barrier_w_shape(s, params.dim, params.alpha).max())
    tol = -SUPSOL_TOL * w_max

    def ok(lam):
        return supersolution_check_w(lam, params, eta_grid, inner_fraction) >= tol

    lo, hi = 1e-6, 1.0
    while not ok(hi):
        lo, hi = hi, hi * 4.0
        if hi > 1e12:
            raise RuntimeError("no supersolution amplitude found below 1e12")
    while hi / lo > 1.0 + rtol:
        mid = np.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)
