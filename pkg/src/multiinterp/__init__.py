"""Multi-space real interpolation with Boyd-function parameters.

Submodules
----------
boyd
    Boyd functions, dilation functions, indices and interpolation parameters.
ktuple
    Tuples of weighted p-norms and their K- and J-functionals.
phifunc
    Weighted L^p functionals over log grids with refinement.
interpnorm
    Interpolation norms and checks of their structural identities.
sobolev_besov
    Discrete periodic Sobolev and Besov norms.
lorentz
    Rearrangements, Lorentz norms and weighted Lorentz interpolation.
cli
    Batch runner for the check suites.
"""

from .boyd import (Atom, BoydFunction, InterpParams, atom, boyd_indices, check_conditions, combine,
                   dilation, evaluate, make_params, parse, to_string)
from .errors import (ConfigError, ConsistencyError, DomainError, InputError, NonConvergenceError,
                     PreconditionError, SolverError, StructureError)
from .interpnorm import (KNormResult, embedding_check, j_norm_upper, k_norm, operator_bound_check,
                         pointwise_k_bound_check, reiteration_check, sigma_integral)
from .ktuple import (BanachTuple, KResult, NormSpec, TupleOperator, delta_norm, j_functional, k_functional,
                     k_inf_functional, sigma_norm)
from .lorentz import MeasureSpace, block_lorentz_norm, lambda_norm, lphi_norm, rearrange
from .phifunc import LogGrid, default_grid, phi_p, refine_until
from .report import Report
from .sobolev_besov import Signal, SobolevDescriptor, besov_norm, sobolev_norm, test_system

__version__ = "0.1.0"
