"""Nonstandard Euler-Maruyama schemes for SDEs with invariant domains.

The package is organised in layers:

* :mod:`nsem.specfun` -- erf, its inverses and the Lambert W function;
* :mod:`nsem.rng` -- seeded, coupled Brownian increments;
* :mod:`nsem.model` -- SDE systems, box domains, geometric Brownian motion;
* :mod:`nsem.schemes` -- EM, NSEM and BIM steppers and the trajectory driver;
* :mod:`nsem.analysis` -- minimal steps, invariance probabilities, Monte Carlo;
* :mod:`nsem.cli` -- the ``nsem`` command-line experiments.
"""

from .errors import (
    ArgumentError,
    DomainError,
    NsemError,
    NumericError,
    RootNotFoundError,
    UnsupportedError,
)
from .specfun import SpecFunConfig, erf, erfc, erf_inv, erfc_inv, lambert_w0, norm_ppf
from .rng import (
    BrownianPath,
    SeedSpec,
    brownian_values,
    coarsen,
    generate_increments,
    generate_path,
    read_path_csv,
    stream_seed,
    write_path_csv,
)
from .model import (
    BoxDomain,
    GbmModel,
    MilianReport,
    SdeModel,
    Violation,
    check_milian_conditions,
    gbm_exact_expectation,
    gbm_exact_solution,
)
from .schemes import (
    BimParams,
    Denominator,
    SchemeSpec,
    Trajectory,
    bim_step,
    em_step,
    exp_bound,
    integrate,
    integrate_many,
    linear_bound,
    nsem_step,
    write_trajectory_csv,
)
from .analysis import (
    ExitStatistics,
    InvarianceBounds,
    McEstimate,
    MinStepResult,
    StrongErrorCurve,
    alpha_of_epsilon,
    exit_statistics,
    expectation_recursion,
    fit_order,
    invariance_probability,
    mc_expectation,
    min_step_em,
    min_step_nsem,
    min_step_numeric,
    ratio_curve,
    strong_error_curve,
)

__version__ = "0.1.0"
