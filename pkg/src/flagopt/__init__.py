"""Riemannian optimization of high-spin ROHF orbitals on flag manifolds."""

from .estimator import ROHFSolver, check_integrals, check_partition
from .exceptions import (
    FCIDumpError,
    LineSearchError,
    NotDescentDirectionError,
    NumericalError,
    ShapeError,
)
from .geometry import (
    DensityPair,
    FlagPoint,
    FlagShape,
    TangentBlocks,
    embed,
    extract,
    metric,
    mo_to_dm,
    phi,
    project_to_tangent,
    retract,
    rohf_densities,
    transport,
)
from .integrals import IntegralSet, parse_fcidump, read_fcidump, write_fcidump
from .optimizers import (
    IterationRecord,
    MethodConfig,
    OptimResult,
    check_convergence,
    line_search,
    solve,
    solve_rcg,
    solve_rlbfgs,
    solve_rsd,
)
from .rohf import (
    ROHFObjective,
    approx_hessian_vector,
    core_guess,
    energy,
    hessian_vector,
    precondition,
    riemannian_gradient,
)

__version__ = "0.1.0"
