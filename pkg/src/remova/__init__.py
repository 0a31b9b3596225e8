"""Numerical test for removable singularities of distributional PDE solutions."""

__version__ = "0.1.0"

from .conv import Problem, Quadrature, conv_eval, criterion_norm, moment, recover_delta  # noqa: E402
from .criterion import Thresholds, check_obound, decide, fit_exponent, sliced_sweep, sweep  # noqa: E402
from .diffop import DeltaStructure, DiffOperator, parse_operator  # noqa: E402
from .field import Exponent  # noqa: E402
from .mollify import Cutoff, EpsilonSchedule, Mollifier  # noqa: E402
from .regimes import bochner_guarantee, classify, codim_variant, max_delta_order, sobolev_sufficient  # noqa: E402

__all__ = [
    "Cutoff", "DeltaStructure", "DiffOperator", "EpsilonSchedule", "Exponent", "Mollifier",
    "Problem", "Quadrature", "Thresholds", "bochner_guarantee", "check_obound", "classify",
    "codim_variant", "conv_eval", "criterion_norm", "decide", "fit_exponent", "max_delta_order",
    "moment", "parse_operator", "recover_delta", "sliced_sweep", "sobolev_sufficient", "sweep",
]
