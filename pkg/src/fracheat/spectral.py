"""Periodic grid, Fourier realization of (-Lap)^alpha and the exact heat step.

The whole space is truncated to a periodic box [-L/2, L/2)^dim with M
uniform points per axis (M a power of two).  The fractional Laplacian is
the Fourier multiplier |xi|^(2*alpha) with the zero mode pinned to 0, and
the linear semigroup step multiplies spectra by exp(-tau |xi|^(2*alpha)),
which preserves the discrete mean exactly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "ResolutionWarning",
    "build_grid",
    "frac_laplacian",
    "heat_semigroup_step",
    "spectral_gradient_dot_x",
    "nyquist_energy_fraction",
]

NYQUIST_FRACTION_MAX = 1e-6


class ResolutionWarning(UserWarning):
    """A field carries non-negligible energy at the Nyquist mode."""


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    M: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.L <= 0.0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.M < 64 or (self.M & (self.M - 1)) != 0:
            raise ValueError(f"M must be a power of two >= 64, got {self.M}")

    @property
    def h(self):
        return self.L / self.M

    @property
    def shape(self):
        return (self.M,) * self.dim

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def axis_coords(self):
        """Node coordinates -L/2 + i*h along one axis."""
        return -self.L / 2.0 + self.h * np.arange(self.M)

    @property
    def axis_wavenumbers(self):
        """Wavenumbers 2*pi*j/L in FFT ordering, j = -M/2 .. M/2-1."""
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)

    def coord_arrays(self):
        """Coordinate arrays broadcastable over the grid, one per axis."""
        x = self.axis_coords
        if self.dim == 1:
            return (x,)
        return (x[:, None], x[None, :])

    def radius(self):
        """|x| at every node."""
        if self.dim == 1:
            return np.abs(self.axis_coords)
        X, Y = self.coord_arrays()
        return np.hypot(X, Y)

    def xi_squared(self):
        """|xi|^2 at every mode, FFT ordering."""
        k = self.axis_wavenumbers
        if self.dim == 1:
            return k**2
        return k[:, None] ** 2 + k[None, :] ** 2


@dataclass
class Field:
    """Real samples on a Grid; the basic PDE state."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self):
        return Field(self.grid, self.values.copy())

    @property
    def mass(self):
        """Discrete integral sum(values) * h^dim."""
        return float(self.values.sum() * self.grid.cell_volume)

    def __add__(self, other):
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c):
        return Field(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")


def build_grid(dim, L, M):
    """Validated periodic grid; rejects M not a power of two."""
    return Grid(dim=dim, L=float(L), M=int(M))


def _multiplier_apply(fld, symbol):
    spectrum = np.fft.fftn(fld.values)
    return Field(fld.grid, np.fft.ifftn(spectrum * symbol).real)


def frac_laplacian(fld, alpha):
    """(-Lap)^alpha via the |xi|^(2*alpha) multiplier; zero mode -> 0."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    xi2 = fld.grid.xi_squared()
    symbol = np.zeros_like(xi2)
    nz = xi2 > 0.0
    symbol[nz] = xi2[nz] ** alpha
    return _multiplier_apply(fld, symbol)


def heat_semigroup_step(fld, tau, alpha):
    """Exact linear step exp(-tau (-Lap)^alpha); discrete mean preserved."""
    if tau < 0.0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0.0:
        return fld.copy()
    xi2 = fld.grid.xi_squared()
    symbol = np.ones_like(xi2)
    nz = xi2 > 0.0
    symbol[nz] = np.exp(-tau * xi2[nz] ** alpha)
    return _multiplier_apply(fld, symbol)


def nyquist_energy_fraction(fld):
    """Fraction of spectral energy carried by the Nyquist modes."""
    spectrum = np.fft.fftn(fld.values)
    power = np.abs(spectrum) ** 2
    total = power.sum()
    if total == 0.0:
        return 0.0
    ny = fld.grid.M // 2
    if fld.grid.dim == 1:
        edge = power[ny]
    else:
        edge = power[ny, :].sum() + power[:, ny].sum() - power[ny, ny]
    return float(edge / total)


def spectral_gradient_dot_x(fld):
    """Drift term sum_axes x_axis * d(field)/d(x_axis), spectral derivatives."""
    frac = nyquist_energy_fraction(fld)
    if frac > NYQUIST_FRACTION_MAX:
        warnings.warn(
            f"Nyquist energy fraction {frac:.2e} exceeds {NYQUIST_FRACTION_MAX:.0e}; "
            "gradient may be under-resolved",
            ResolutionWarning,
            stacklevel=2,
        )
    grid = fld.grid
    k = grid.axis_wavenumbers.copy()
    k[grid.M // 2] = 0.0  # odd derivative: drop the unpaired Nyquist mode
    spectrum = np.fft.fftn(fld.values)
    coords = grid.coord_arrays()
    out = np.zeros(grid.shape)
    for axis, x in enumerate(coords):
        shape = [1] * grid.dim
        shape[axis] = grid.M
        ka = k.reshape(shape)
        deriv = np.fft.ifftn(1j * ka * spectrum).real
        out += x * deriv
    return Field(grid, out)
