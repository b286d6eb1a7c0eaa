"""Model parameters, critical exponents and the subcriticality checker.

The model is the absorption equation  du/dt + (-Lap)^alpha u + t^beta u^p = 0
on R^N with measure initial data.  Two exponents organize the behaviour of
the Dirac-data solution family: the solvability threshold

    p_star  = 1 + 2*alpha*(1+beta)/N

and the flat/singular threshold

    p_dstar = 1 + 2*alpha*(1+beta)/(N + 2*alpha).

Everything here is pure arithmetic; safe to call concurrently.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

__all__ = [
    "ModelParams",
    "AbsorptionSpec",
    "Regime",
    "SubcriticalReport",
    "critical_exponents",
    "classify_regime",
    "maximal_flat_solution",
    "check_subcritical",
]

# Regime boundaries are analytic, so ties at p_star / p_dstar are decided
# by direct floating comparison with this epsilon.
BOUNDARY_EPS = 1e-12


class Regime(Enum):
    DIFFUSIVE = "Diffusive"
    FLAT_ABSORPTION = "FlatAbsorption"
    BORDERLINE = "Borderline"
    VERY_SINGULAR = "VerySingular"
    SUPERCRITICAL = "Supercritical"


def critical_exponents(alpha, beta, dim):
    """Return (p_star, p_dstar) for the given diffusion order and weight."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if beta <= -1.0:
        raise ValueError(f"beta must exceed -1, got {beta}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    p_star = 1.0 + 2.0 * alpha * (1.0 + beta) / dim
    p_dstar = 1.0 + 2.0 * alpha * (1.0 + beta) / (dim + 2.0 * alpha)
    return p_star, p_dstar


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple (alpha, beta, p, dim) with derived exponents."""

    alpha: float
    beta: float
    p: float
    dim: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.beta <= -1.0:
            raise ValueError(f"beta must exceed -1, got {self.beta}")
        if self.p <= 0.0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")

    @property
    def p_star(self):
        return critical_exponents(self.alpha, self.beta, self.dim)[0]

    @property
    def p_dstar(self):
        return critical_exponents(self.alpha, self.beta, self.dim)[1]

    @property
    def regime(self):
        return classify_regime(self)

    @property
    def similarity_exponent(self):
        """Time-decay exponent (1+beta)/(p-1) of the self-similar scaling."""
        if self.p <= 1.0:
            raise ValueError("similarity exponent requires p > 1")
        return (1.0 + self.beta) / (self.p - 1.0)

    @property
    def tail_exponent(self):
        """Spatial decay exponent N + 2*alpha of the heat kernel tail."""
        return self.dim + 2.0 * self.alpha


@dataclass(frozen=True)
class AbsorptionSpec:
    """Absorption nonlinearity h(t, r) = t^beta * g(r).

    ``g`` is None for the pure power law g(r) = r^p; otherwise a
    nondecreasing nonnegative callable with g(0) = 0.
    """

    beta: float
    p: float | None = None
    g: object = None

    def __post_init__(self):
        if self.beta <= -1.0:
            raise ValueError(f"beta must exceed -1, got {self.beta}")
        if (self.p is None) == (self.g is None):
            raise ValueError("exactly one of p (power law) or g (general) required")
        if self.p is not None and self.p <= 0.0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.g is not None:
            g0 = float(self.g(0.0))
            if abs(g0) > 1e-14:
                raise ValueError(f"g(0) must be 0, got {g0}")
            s = np.linspace(0.0, 10.0, 64)
            gs = np.asarray([float(self.g(x)) for x in s])
            if np.any(gs < -1e-14):
                raise ValueError("g must be nonnegative")
            if np.any(np.diff(gs) < -1e-12 * max(1.0, gs.max())):
                raise ValueError("g must be nondecreasing on its sample set")

    @property
    def is_power_law(self):
        return self.p is not None

    def g_of(self, s):
        if self.is_power_law:
            return np.asarray(s, dtype=float) ** self.p
        return self.g(s)


def classify_regime(params):
    """Place p relative to 1 < p_dstar < p_star.

    Monotone in p: Diffusive < FlatAbsorption < Borderline < VerySingular
    < Supercritical.
    """
    p = params.p
    ps, pd = critical_exponents(params.alpha, params.beta, params.dim)
    if p <= 1.0:
        return Regime.DIFFUSIVE
    if abs(p - pd) <= BOUNDARY_EPS:
        return Regime.BORDERLINE
    if p < pd:
        return Regime.FLAT_ABSORPTION
    if p < ps and abs(p - ps) > BOUNDARY_EPS:
        return Regime.VERY_SINGULAR
    return Regime.SUPERCRITICAL


def maximal_flat_solution(params, t):
    """Spatially flat solution U_p(t) = ((1+beta)/(p-1))^(1/(p-1)) t^-((1+beta)/(p-1)).

    The maximal solution of y' + t^beta y^p = 0 on (0, inf); requires p > 1.
    """
    if params.p <= 1.0:
        raise ValueError("no maximal flat solution for p <= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("t must be positive")
    q = params.similarity_exponent
    amp = ((1.0 + params.beta) / (params.p - 1.0)) ** (1.0 / (params.p - 1.0))
    out = amp * t ** (-q)
    return out if out.ndim else float(out)


@dataclass
class SubcriticalReport:
    """Evidence for the tail integral  int_1^inf g(s) s^(-1-p_star) ds."""

    verdict: str  # "converges" | "diverges" | "inconclusive"
    partial_integral: float
    log_slope: float
    increment_ratio: float
    t_max: float


def check_subcritical(absorption, alpha, dim, t_max=1e4, tolerance=0.1):
    """Three-valued convergence verdict for the subcriticality integral.

    Estimates  int_1^T g(s) s^(-1-p_star) ds  by adaptive quadrature and
    compares the empirical log-slope of g near T against p_star.  When the
    slope is within ``tolerance`` of p_star the slope test is silent; the
    trend of the per-doubling tail increments then decides, and stays
    "inconclusive" when that trend is itself ambiguous.
    """
    if t_max < 1e3:
        raise ValueError("t_max must be >= 1e3")
    p_star, _ = critical_exponents(alpha, absorption.beta, dim)
    g = absorption.g_of

    def integrand(s):
        return float(g(s)) * s ** (-1.0 - p_star)

    # partial integrals at T/4, T/2, T for the increment trend
    breaks = [1.0, t_max / 4.0, t_max / 2.0, t_max]
    partials = []
    acc = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        v, _ = integrate.quad(integrand, a, b, limit=400)
        acc += v
        partials.append(acc)

    g_hi = float(g(t_max))
    g_lo = float(g(t_max / 2.0))
    if g_hi <= 0.0 or g_lo <= 0.0:
        # g vanishes at infinity scale: integral trivially converges
        return SubcriticalReport("converges", partials[-1], -np.inf, 0.0, t_max)
    log_slope = (np.log(g_hi) - np.log(g_lo)) / np.log(2.0)

    inc1 = partials[1] - partials[0]
    inc2 = partials[2] - partials[1]
    ratio = inc2 / inc1 if inc1 > 0.0 else 0.0

    if log_slope >= p_star + tolerance:
        verdict = "diverges"
    elif log_slope <= p_star - tolerance:
        verdict = "converges"
    elif ratio >= 0.97:
        verdict = "diverges"
    elif ratio <= 0.90:
        verdict = "converges"
    else:
        verdict = "inconclusive"
    return SubcriticalReport(verdict, partials[-1], log_slope, ratio, t_max)
