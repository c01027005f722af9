"""Nonlocal convolution-type Orlicz functionals on discretised domains."""
__version__ = "0.1.0"

from ._backend import BACKEND, get_threads, set_threads  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .fields import Expression, Field  # noqa: E402
from .functionals import (  # noqa: E402
    FunctionalValue,
    eval_ell,
    eval_F,
    eval_F_power,
    eval_G,
    eval_H,
    eval_H_star,
    eval_pairing_Phi,
    m_subspace_residual,
)
from .grid import (  # noqa: E402
    Grid,
    GridFunction,
    Kernel,
    PairFunction,
    approximate,
    build_grid,
    build_kernel,
    mollify,
    quadrature_double,
)
from .norms import (  # noqa: E402
    NormResult,
    decompose_mean_zero,
    f_norm,
    g_norm,
    h_norm,
    h_star_norm,
    luxemburg,
    poincare_certificate,
    verify_sandwich,
)
from .phi import (  # noqa: E402
    ConditionReport,
    PhiFunction,
    SamplingConfig,
    build_phi,
    calibrate,
    check_conditions,
    conjugate,
    estimate_growth_constants,
    eval_phi,
    eval_prime,
    log_psi,
    power,
)
from .solver import (  # noqa: E402
    SolveResult,
    SolverOptions,
    dual_apply,
    dual_kernel_representation,
    el_residual,
    energy,
    energy_gradient,
    minimize,
)
