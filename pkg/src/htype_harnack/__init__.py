"""Numerical toolkit for horizontally elliptic operators on H-type groups.

Set ``HTYPE_THREADS`` before import to cap the BLAS/OpenMP thread pools.
"""

import os as _os

__version__ = "0.1.0"

if _os.environ.get("HTYPE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["HTYPE_THREADS"])

from .exceptions import (  # noqa: E402
    DomainError,
    HTypeError,
    NumericalConsistencyError,
    PreconditionError,
    SingularityError,
    SolverError,
    StructureError,
)
from .gauge import (  # noqa: E402
    BallSpec,
    Estimate,
    GaugeConstants,
    ball_volume,
    gauge_constants,
    gauge_norm,
    horizontal_gradient_d,
    horizontal_hessian_d,
    mean_value_beta,
    phi,
    quasi_distance,
)
from .group import (  # noqa: E402
    GroupPoint,
    HTypeGroupSpec,
    compose,
    dilate,
    heisenberg,
    inverse,
    preset,
    quaternionic,
    r5_example,
    validate_htype,
)
from .operator import (  # noqa: E402
    CoefficientField,
    EllipticityBounds,
    apply_LA_fd,
    delta_from_ratio,
    identity_field,
    landis_delta_field,
    landis_delta_pointwise,
)
from .barrier import BarrierVerdict, ball_region, verify_barrier_lemma  # noqa: E402
from .harnack_lab import (  # noqa: E402
    DiscreteSolution,
    GridSpec,
    HarnackReport,
    assemble_system,
    critical_density_experiment,
    dilation_consistency,
    expand_LA_coordinates,
    harnack_quotient,
    solve_dirichlet,
)
