import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fracheat as fh
from fracheat.kernel import (
    KernelProfile,
    default_radii,
    dirac_approx,
    gamma_radial,
    image_tail_field,
    kernel_bound_constant,
    kernel_profile,
    marcinkiewicz_quasinorm,
    scaled_kernel,
)
from fracheat.spectral import build_grid


@pytest.fixture(scope="module")
def prof1():
    return kernel_profile(0.5, 1)


@pytest.fixture(scope="module")
def prof2():
    return kernel_profile(0.5, 2)


def test_cauchy_closed_form_1d(prof1):
    for r in (0.0, 0.5, 3.0, 12.0, 40.0):
        exact = 1.0 / (np.pi * (1.0 + r * r))
        assert prof1.evaluate(r) == pytest.approx(exact, rel=2e-5)


def test_cauchy_closed_form_2d(prof2):
    for r in (0.0, 0.5, 3.0, 12.0, 40.0):
        exact = (1.0 + r * r) ** -1.5 / (2.0 * np.pi)
        assert prof2.evaluate(r) == pytest.approx(exact, rel=2e-5)


@pytest.mark.parametrize("dim", [1, 2])
def test_gaussian_endpoint(dim):
    for r in (0.0, 1.0, 3.0):
        val, err = gamma_radial(1.0, dim, r)
        exact = (4.0 * np.pi) ** (-dim / 2.0) * np.exp(-r * r / 4.0)
        assert val == pytest.approx(exact, rel=1e-6)


def test_gamma_radial_rejects_bad_args():
    with pytest.raises(ValueError):
        gamma_radial(1.5, 1, 0.0)
    with pytest.raises(ValueError):
        gamma_radial(0.5, 1, -1.0)


def test_profile_tail_exponent(prof1, prof2):
    # the sampled tail should decay like r^-(N+2a)
    assert prof1.tail_exponent_fit == pytest.approx(2.0, abs=0.05)
    assert prof2.tail_exponent_fit == pytest.approx(3.0, abs=0.05)


def test_profile_total_mass(prof1):
    # trapezoid over samples plus fitted tail should integrate to 1
    r, v = prof1.radii, prof1.values
    inner = np.trapezoid(v, r) * 2.0  # both sides
    total = inner + prof1.tail_mass(r[-1])
    assert total == pytest.approx(1.0, abs=2e-3)


def test_scaled_kernel_scaling(prof1):
    # Gamma(t, x) = t^-1 Gamma(1, x/t) for a = 1/2, N = 1
    for t in (0.3, 2.0):
        for x in (0.0, 1.0, 5.0):
            lhs = scaled_kernel(prof1, t, x)
            rhs = prof1.evaluate(abs(x) / t) / t
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_profile_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACHEAT_CACHE", str(tmp_path))
    radii = np.concatenate([np.linspace(0.0, 10.0, 41), np.geomspace(10.5, 60.0, 20)])
    first = kernel_profile(0.5, 1, radii=radii)
    files = os.listdir(tmp_path)
    assert len(files) == 1
    second = kernel_profile(0.5, 1, radii=radii)
    np.testing.assert_array_equal(first.values, second.values)


def test_profile_validation():
    with pytest.raises(ValueError):
        KernelProfile(0.5, 1, np.array([1.0, 2.0]), np.array([1.0, 0.5]), np.zeros(2))
    with pytest.raises(ValueError):
        KernelProfile(0.5, 1, np.array([0.0, 1.0]), np.array([1.0, -0.5]), np.zeros(2))


def test_bound_constant_matches_closed_form(prof1):
    # for the Cauchy kernel, Gamma(1,r)(1+r^2) = 1/pi exactly
    assert kernel_bound_constant(prof1) == pytest.approx(1.0 / np.pi, rel=1e-4)


def test_dirac_approx_mass(prof1):
    g = build_grid(1, 200.0, 4096)
    for k in (1.0, 100.0):
        init = dirac_approx(g, k, 0.1, prof1)
        assert init.mass == pytest.approx(k, rel=1e-4)


def test_dirac_approx_center_value(prof1):
    g = build_grid(1, 200.0, 4096)
    init = dirac_approx(g, 2.0, 0.1, prof1)
    # center keeps the pointwise kernel value up to image/mass corrections
    assert init.values[g.M // 2] == pytest.approx(2.0 * scaled_kernel(prof1, 0.1, 0.0), rel=1e-3)


def test_dirac_approx_rejects_wide_kernel(prof1):
    g = build_grid(1, 200.0, 4096)
    with pytest.raises(ValueError):
        dirac_approx(g, 1.0, 5.0, prof1)  # kernel too wide for the box


def test_image_tail_field_magnitude(prof1):
    g = build_grid(1, 200.0, 4096)
    imgs = image_tail_field(g, prof1, 1.0)
    # at the box edge the nearest image sits at distance L/2
    edge = imgs[0]
    direct = scaled_kernel(prof1, 1.0, g.L / 2.0)
    assert edge > direct  # two images at L/2 beat one direct tail value
    # centre sees two images at L and two at 2L, each pair bounded by
    # the kernel value at its distance
    centre_bound = 2.0 * (scaled_kernel(prof1, 1.0, g.L) + scaled_kernel(prof1, 1.0, 2.0 * g.L))
    assert imgs[g.M // 2] < 1.05 * centre_bound


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.1, 50.0), kappa=st.floats(1.1, 4.0))
def test_quasinorm_homogeneous(c, kappa):
    rng = np.random.default_rng(0)
    v = rng.exponential(size=300)
    mu = np.full(300, 0.01)
    q1 = marcinkiewicz_quasinorm(v, mu, kappa)
    qc = marcinkiewicz_quasinorm(c * v, mu, kappa)
    assert qc == pytest.approx(c * q1, rel=1e-12)


def test_quasinorm_indicator_exact():
    # u = a on a set of measure m: quasi-norm is a * m^(1/kappa)
    v = np.concatenate([np.full(10, 3.0), np.zeros(20)])
    mu = np.full(30, 0.5)
    assert marcinkiewicz_quasinorm(v, mu, 2.0) == pytest.approx(3.0 * np.sqrt(5.0))


def test_default_radii_struct():
    r = default_radii()
    assert r[0] == 0.0
    assert np.all(np.diff(r) > 0)
    assert r[-1] >= 160.0
