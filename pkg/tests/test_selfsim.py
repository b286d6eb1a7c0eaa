import numpy as np
import pytest

import fracheat as fh
from fracheat.params import ModelParams
from fracheat.selfsim import (
    Profile,
    barrier_w_shape,
    find_lambda_threshold,
    flat_profile_value,
    flatness_gap,
    rescale_profile,
    selfsim_residual,
    supersolution_check_w,
    tail_fit,
)
from fracheat.spectral import Field, build_grid


@pytest.fixture(scope="module")
def par():
    return ModelParams(0.5, 0.0, 1.6, 1)


@pytest.fixture(scope="module")
def eta_grid():
    return build_grid(1, 100.0, 1024)


def test_flat_profile_value_solves_algebra(par):
    # c v = v^p with c = (1+beta)/(p-1)
    a = flat_profile_value(par)
    c = (1 + par.beta) / (par.p - 1)
    assert c * a == pytest.approx(a**par.p, rel=1e-14)


def test_flat_profile_residual_zero(par, eta_grid):
    a = flat_profile_value(par)
    prof = Profile(par, Field(eta_grid, np.full(eta_grid.shape, a)), 1.0)
    res, _ = selfsim_residual(prof)
    assert res <= 1e-12


def test_flatness_gap_zero_for_flat(par, eta_grid):
    a = flat_profile_value(par)
    prof = Profile(par, Field(eta_grid, np.full(eta_grid.shape, a)), 1.0)
    assert flatness_gap(prof) == pytest.approx(0.0, abs=1e-14)


def test_rescale_profile_inverts_scaling(par):
    # sample u(t, x) = t^-c V(x / t^(1/2a)); rescaling must return V
    g = build_grid(1, 100.0, 2048)
    t = 0.49
    c = (1 + par.beta) / (par.p - 1)
    stretch = t ** (1 / (2 * par.alpha))
    v_exact = lambda s: np.exp(-(s / 8.0) ** 2)
    snap = Field(g, t**-c * v_exact(g.axis_coords / stretch))
    eta_grid = build_grid(1, 60.0, 512)
    prof = rescale_profile(snap, t, par, eta_grid)
    assert np.abs(prof.field.values - v_exact(eta_grid.axis_coords)).max() < 1e-4


def test_rescale_profile_box_guard(par):
    g = build_grid(1, 100.0, 1024)
    snap = Field(g, np.ones(g.shape))
    big_eta = build_grid(1, 100.0, 1024)
    with pytest.raises(ValueError):
        rescale_profile(snap, 4.0, par, big_eta)  # needs |x| up to 200


def test_tail_fit_recovers_power_law(par, eta_grid):
    s = np.abs(eta_grid.axis_coords)
    vals = np.maximum(s, 0.5) ** -3.0  # exact power law on the fit window
    prof = Profile(par, Field(eta_grid, vals), 1.0)
    slope, score = tail_fit(prof, (10.0, 45.0))
    assert slope == pytest.approx(-3.0, abs=0.1)

    with_log = vals * np.log(2.0 + s)
    slope_l, score_l = tail_fit(Profile(par, Field(eta_grid, with_log), 1.0), (10.0, 45.0))
    assert score_l > score  # the log factor should be detected


def test_tail_fit_window_guards(par, eta_grid):
    prof = Profile(par, Field(eta_grid, np.ones(eta_grid.shape)), 1.0)
    with pytest.raises(ValueError):
        tail_fit(prof, (5.0, 49.0))  # upper end too close to the box edge
    with pytest.raises(ValueError):
        tail_fit(prof, (10.0, 20.0))  # ratio below 4


def test_barrier_w_shape():
    s = np.linspace(0.0, 50.0, 500)
    w = barrier_w_shape(s, 1, 0.5)
    assert np.all(w > 0)
    assert w[0] == pytest.approx(1.0)  # ln(e) / 1
    # decays like s^-2 ln s for N=1, a=1/2
    assert w[-1] < 1e-2


def test_supersolution_monotone_in_lambda(par, eta_grid):
    vals = [supersolution_check_w(l, par, eta_grid) for l in (1.0, 10.0, 100.0, 1000.0)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_threshold_bisection(par, eta_grid):
    lam0 = find_lambda_threshold(par, eta_grid)
    assert lam0 > 0
    # the operator changes sign across the threshold
    assert supersolution_check_w(0.5 * lam0, par, eta_grid) < 0
    assert supersolution_check_w(2.0 * lam0, par, eta_grid) >= 0


def test_threshold_requires_very_singular_regime(eta_grid):
    with pytest.raises(ValueError):
        find_lambda_threshold(ModelParams(0.5, 0.0, 1.2, 1), eta_grid)
