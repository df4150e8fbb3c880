"""Nested forward-mode differentiation via truncated Taylor jets."""

from .backend import BACKEND, compiled_kernels, python_kernels
from .fields import (
    DEFAULT_MAX_DEPTH,
    ComponentField,
    EvalContext,
    EvaluableField,
    jacobian,
    jacobian_in,
    partial,
)
from .jet import DepthExceeded, Jet, active_kernels, set_kernels, variables
from .layout import JetLayout, get_layout

__all__ = [
    "BACKEND",
    "DEFAULT_MAX_DEPTH",
    "ComponentField",
    "DepthExceeded",
    "EvalContext",
    "EvaluableField",
    "Jet",
    "JetLayout",
    "get_layout",
    "jacobian",
    "jacobian_in",
    "partial",
    "variables",
    "active_kernels",
    "compiled_kernels",
    "python_kernels",
    "set_kernels",
]
