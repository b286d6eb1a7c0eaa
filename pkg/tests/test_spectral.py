import warnings

import numpy as np
import pytest
from scipy import integrate, special

from fracheat.spectral import (
    Field,
    ResolutionWarning,
    build_grid,
    frac_laplacian,
    heat_semigroup_step,
    nyquist_energy_fraction,
    spectral_gradient_dot_x,
)


@pytest.fixture(scope="module")
def gauss_grid():
    g = build_grid(1, 60.0, 2048)
    return g, Field(g, np.exp(-g.axis_coords**2))


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid(1, 60.0, 100)  # not a power of two
    with pytest.raises(ValueError):
        build_grid(1, 60.0, 32)  # too small
    with pytest.raises(ValueError):
        build_grid(3, 60.0, 128)


def pv_frac_lap_1d(f, x, alpha, cutoff=200.0):
    """Free-space fractional Laplacian by principal-value quadrature."""
    c = 4.0**alpha * special.gamma(0.5 + alpha) / (
        np.sqrt(np.pi) * abs(special.gamma(-alpha)))
    integrand = lambda y: (2 * f(x) - f(x + y) - f(x - y)) / y ** (1 + 2 * alpha)
    v1, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    v2, _ = integrate.quad(integrand, 1.0, cutoff, limit=200)
    tail = 2 * f(x) * cutoff ** (-2 * alpha) / (2 * alpha)  # f vanishes out there
    return c * (v1 + v2 + tail)


# the periodic symbol differs from free space by a spatially constant
# offset of size O(L^-(1+2a)) coming from the |xi|^{2a} kink at xi = 0,
# so the absolute tolerance is graded in alpha (worst at small alpha)
@pytest.mark.parametrize("alpha,atol", [(0.3, 3e-3), (0.5, 1e-3), (0.8, 1e-3)])
def test_frac_laplacian_against_pv_integral(gauss_grid, alpha, atol):
    g, fld = gauss_grid
    lap = frac_laplacian(fld, alpha)
    f = lambda x: np.exp(-x * x)
    for xq in (0.0, 0.7, 1.5):
        i = int(np.argmin(np.abs(g.axis_coords - xq)))
        oracle = pv_frac_lap_1d(f, g.axis_coords[i], alpha)
        assert lap.values[i] == pytest.approx(oracle, rel=2e-3, abs=atol)


def test_frac_laplacian_box_offset_scaling():
    """The periodic/free-space offset shrinks like L^-(1+2a)."""
    alpha = 0.3
    f = lambda x: np.exp(-x * x)
    offsets = []
    for L, M in [(60.0, 2048), (240.0, 8192)]:
        g = build_grid(1, L, M)
        lap = frac_laplacian(Field(g, f(g.axis_coords)), alpha)
        i = int(np.argmin(np.abs(g.axis_coords)))
        offsets.append(abs(lap.values[i] - pv_frac_lap_1d(f, g.axis_coords[i], alpha)))
    ratio = offsets[0] / offsets[1]
    assert ratio == pytest.approx(4.0 ** (1.0 + 2.0 * alpha), rel=0.1)


def test_frac_laplacian_alpha_one_is_laplacian(gauss_grid):
    g, fld = gauss_grid
    lap = frac_laplacian(fld, 1.0)
    x = g.axis_coords
    exact = -(4 * x * x - 2) * np.exp(-x * x)  # -(e^{-x^2})''
    assert np.abs(lap.values - exact).max() < 1e-8


def test_frac_laplacian_kills_constants():
    g = build_grid(1, 10.0, 128)
    lap = frac_laplacian(Field(g, np.full(g.shape, 3.7)), 0.6)
    assert np.abs(lap.values).max() < 1e-12


def test_semigroup_eigenmode():
    g = build_grid(1, 60.0, 1024)
    j, alpha, tau = 7, 0.5, 0.3
    mode = np.sin(2 * np.pi * j * g.axis_coords / g.L)
    out = heat_semigroup_step(Field(g, mode), tau, alpha)
    decay = np.exp(-tau * (2 * np.pi * j / g.L) ** (2 * alpha))
    assert np.abs(out.values - decay * mode).max() < 1e-13


def test_semigroup_preserves_mass(gauss_grid):
    g, fld = gauss_grid
    out = heat_semigroup_step(fld, 0.7, 0.4)
    assert out.mass == pytest.approx(fld.mass, rel=1e-13)


def test_gradient_dot_x_fd_oracle():
    g = build_grid(1, 60.0, 8192)
    x = g.axis_coords
    fld = Field(g, np.exp(-x * x) * (1 + 0.3 * np.sin(x)))
    got = spectral_gradient_dot_x(fld).values
    h = g.h
    v = fld.values
    # 4th-order centred difference of x * f'
    fp = (np.roll(v, 2) - 8 * np.roll(v, 1) + 8 * np.roll(v, -1) - np.roll(v, -2)) / (12 * h)
    assert np.abs(got - x * fp).max() < 1e-7


def test_gradient_dot_x_2d_radial():
    g = build_grid(2, 20.0, 128)
    r2 = g.radius() ** 2
    fld = Field(g, np.exp(-r2))
    got = spectral_gradient_dot_x(fld).values
    exact = -2 * r2 * np.exp(-r2)  # x . grad e^{-|x|^2}
    assert np.abs(got - exact).max() < 1e-9


def test_nyquist_warning_on_rough_field():
    g = build_grid(1, 10.0, 128)
    rough = Field(g, np.where(np.abs(g.axis_coords) < 2.5, 1.0, 0.0))
    assert nyquist_energy_fraction(rough) > 1e-6
    with pytest.warns(ResolutionWarning):
        spectral_gradient_dot_x(rough)


def test_field_algebra():
    g = build_grid(1, 10.0, 128)
    a = Field(g, np.ones(g.shape))
    b = Field(g, 2.0 * np.ones(g.shape))
    assert ((a + b) * 2.0).values[0] == pytest.approx(6.0)
    assert (b - a).mass == pytest.approx(10.0)
