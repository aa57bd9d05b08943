"""Projection-free Frank-Wolfe solvers and rate-distortion relevance attribution.

The package covers feasible regions with exact linear minimization oracles
(:mod:`fwrde.regions`), five Frank-Wolfe variants (:mod:`fwrde.solvers`),
small feedforward classifiers with a moment-matched distortion objective
(:mod:`fwrde.classifier`), the attribution pipelines
(:mod:`fwrde.attribution`), the relevance-ordering evaluation test
(:mod:`fwrde.evaluation`), and a CLI (:mod:`fwrde.cli`).

Hot kernels run in a compiled extension when available; ``KERNEL_BACKEND``
reports which backend is active (see :mod:`fwrde._kernels`).
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .attribution import (
    OrderingResult,
    RelevanceMap,
    induced_ordering,
    mr_rde,
    ord_rde,
    rc_rde,
    sensitivity_map,
)
from .classifier import (
    DistortionObjective,
    FeedforwardNetwork,
    GaussianInputModel,
    Layer,
    adf_forward,
    distortion,
    distortion_gradient,
    fit_gaussian,
    forward,
    input_gradient,
    load_network,
    load_noise_model,
    mc_distortion,
    save_network,
    save_noise_model,
)
from .evaluation import (
    OrderingTestCurve,
    aggregate,
    default_rate_grid,
    map_to_curve,
    ordering_test,
)
from .exceptions import InputError, NumericError
from .regions import (
    BirkhoffPolytope,
    KSparsePolytope,
    NonNegKSparsePolytope,
    contains,
    lmo_birkhoff,
    lmo_ksparse,
    lmo_nonneg_ksparse,
)
from .solvers import (
    ActiveSet,
    FunctionObjective,
    SFWConfig,
    SolverConfig,
    SolverTrace,
    afw_minimize,
    dual_gap,
    fw_minimize,
    lafw_minimize,
    lcg_minimize,
    sfw_minimize,
    step_basic,
    step_monotone,
)

__version__ = "0.1.0"
