"""Shapley-value attribution under the interventional value function."""

from .core import (
    CONDITIONING,
    Background,
    ShapMatrix,
    ShapVector,
    explain,
    make_background,
    shap_exact,
    shap_kernel,
    shap_tree,
    value_function,
)
from .summary import DependenceTable, SummaryTable, local_explanation, shap_dependence, shap_summary

__all__ = [
    "Background",
    "CONDITIONING",
    "DependenceTable",
    "ShapMatrix",
    "ShapVector",
    "SummaryTable",
    "explain",
    "local_explanation",
    "make_background",
    "shap_dependence",
    "shap_exact",
    "shap_kernel",
    "shap_summary",
    "shap_tree",
    "value_function",
]
