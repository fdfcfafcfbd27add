"""Particle simulation of mean-field SDEs with common noise.

Explicit tamed Euler (strong order 1/2) and tamed Milstein (strong order 1)
schemes for interacting particle systems whose coefficients may grow
super-linearly, plus a harness that measures the rates by coupled two-level
self-convergence.
"""

from ._kernels import BACKEND
from .brownian import (BrownianBundle, CommutativeClosedForm, CLOSED_FORM,
                       SubstepApprox, coarsen, double_integral, generate)
from .harness import (MomentReport, RateReport, chaos_trend,
                      convergence_study, moment_trace, two_level_error)
from .measure import (EmpiricalMeasureView, mean, w2_1d_exact, w2_sq_coupled,
                      w2_sq_to_delta0)
from .models import (AuditReport, ModelSpec, audit_assumptions,
                     builtin_double_well, builtin_double_well_common,
                     builtin_measure_coupled_diffusion, builtin_three_halves,
                     make_builtin)
from .scheme import (BlowUpError, ModeError, ParticleEnsemble, SchemeConfig,
                     SchemeKind, euler_step, milstein_step, simulate)
from .taming import TamingKind, check_growth_envelope, tame

__version__ = "0.1.0"
