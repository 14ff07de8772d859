"""Market package initialization."""
from .models import Margins, SurplusMatrix, Matching, SystematicUtilities, GroupUtilities, SampleCounts
from .feasibility import margin_residuals, max_residual, is_feasible, conditional_probs, single_shares

__all__ = [
    "Margins", "SurplusMatrix", "Matching", "SystematicUtilities", "GroupUtilities", "SampleCounts",
    "margin_residuals", "max_residual", "is_feasible", "conditional_probs", "single_shares",
]
