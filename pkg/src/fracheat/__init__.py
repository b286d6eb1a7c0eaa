"""Pseudospectral simulator and verification harness for the fractional
heat equation with subcritical absorption and Dirac initial data."""

from .params import (
    AbsorptionSpec,
    ModelParams,
    Regime,
    check_subcritical,
    classify_regime,
    critical_exponents,
    maximal_flat_solution,
)
from .spectral import (
    Field,
    Grid,
    build_grid,
    frac_laplacian,
    heat_semigroup_step,
    spectral_gradient_dot_x,
)
from .kernel import (
    KernelProfile,
    MeasureData,
    dirac_approx,
    kernel_bound_constant,
    kernel_profile,
    marcinkiewicz_quasinorm,
    scaled_kernel,
)
from .evolve import (
    TimeMesh,
    Trajectory,
    absorption_step_exact,
    barrier_check,
    dirac_family_run,
    duhamel_residual,
    evolve,
    short_time_constant,
    strang_step,
)
from .selfsim import (
    Profile,
    find_lambda_threshold,
    flat_profile_value,
    flatness_gap,
    rescale_profile,
    selfsim_residual,
    supersolution_check_w,
    tail_fit,
)

__version__ = "0.1.0"
