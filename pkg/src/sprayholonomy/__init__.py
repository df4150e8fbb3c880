"""Holonomy distributions and variational freedom of sprays."""

from .ad import BACKEND
from .analysis import AnalysisError, AnalysisReport, emit, render_text, run_analysis
from .config import AnalysisConfig, ConfigError, config_from_dict, load_config
from .examples import builtin_examples, compare_expected, example_config
from .expr import parse, to_source
from .geometry import (
    Domain,
    SprayModel,
    curvature,
    frame_pack,
    homogeneity_residual,
    isotropy_check,
    jacobi,
)
from .holonomy import analyze_distribution, bracket, saturate
from .transport import BaseCurve, geodesic, horizontal_lift, invariance_by_transport, square_loop
from .variational import (
    LagrangianCandidate,
    candidate_report,
    classify,
    combine,
    el_residual,
    geometric_mean,
    invariance_residual,
    linear,
    power_mean,
)

__version__ = "0.1.0"
