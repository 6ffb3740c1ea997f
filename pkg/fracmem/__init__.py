from .bridge import Bridge
from .config import ConfigError, RunConfig, dump_config, parse_config
from .fracops import (FracOrder, GridError, TimeGrid, TimeSeries, check_adjoint, check_semigroup,
                      laplace_check_exp, rl_left, rl_power_closed_form, rl_right)
from .testfn import (AdmissibilityError, CutoffSpec, TestFunctionSpec, chi_eval, cutoff_constants,
                     frac_laplacian_radial, verify_comparability)
from .volterra import (InequalityParams, StepSizeError, certify_bound_i, closed_form_v,
                       exp_frac_integral_limits, liminf_growth_estimate, solve_linear_volterra,
                       weighted_hardy_check)
from .wavesim import (IntegrationFailure, ModelParams, Outcome, frac_laplacian_apply, memory_term,
                      moment_inequality_monitor, run, step, threshold_sweep)
