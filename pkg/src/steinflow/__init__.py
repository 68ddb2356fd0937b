"""Stein variational gradient descent with multiple RBF kernels."""

from steinflow.errors import InputError, NumericalError, ParseError
from steinflow.kernel import (
    BandwidthGrid,
    PairwiseKernelEval,
    build_grid,
    build_pairwise_eval,
    median_heuristic,
    multi_kernel_eval,
    normalize_weights,
    rbf_eval,
    uniform_weights,
)
from steinflow.discrepancy import (
    KsdEstimate,
    ksd_per_kernel,
    mksd,
    optimal_weights,
    u_term,
)
from steinflow.dynamics import (
    AdaGradState,
    RunTrace,
    adagrad_step,
    mk_svgd_direction,
    run_mk_svgd,
    run_svgd,
    svgd_direction,
)

__version__ = "0.1.0"

__all__ = [
    "AdaGradState",
    "BandwidthGrid",
    "InputError",
    "KsdEstimate",
    "NumericalError",
    "PairwiseKernelEval",
    "ParseError",
    "RunTrace",
    "adagrad_step",
    "build_grid",
    "build_pairwise_eval",
    "ksd_per_kernel",
    "median_heuristic",
    "mk_svgd_direction",
    "mksd",
    "multi_kernel_eval",
    "normalize_weights",
    "optimal_weights",
    "rbf_eval",
    "run_mk_svgd",
    "run_svgd",
    "svgd_direction",
    "u_term",
    "uniform_weights",
]
