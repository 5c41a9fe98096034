"""Sampled checks of the growth, coercivity and control-affinity hypotheses."""

from .affine import AffineFit, AffineGrowthReport, check_affine, recheck_affine
from .alpha import AlphaReport, check_alpha_bound
from .coercivity import CoercivityReport, Shell, check_coercivity
from .fitting import ConditionFit, fit_growth
from .growth import GrowthReport, check_growth_theorem53, check_growth_tonelli_morrey_cv, recheck_growth
from .sampling import SampleBox, expand_box

__all__ = [
    "AffineFit",
    "AffineGrowthReport",
    "AlphaReport",
    "CoercivityReport",
    "ConditionFit",
    "GrowthReport",
    "SampleBox",
    "Shell",
    "check_affine",
    "check_alpha_bound",
    "check_coercivity",
    "check_growth_theorem53",
    "check_growth_tonelli_morrey_cv",
    "expand_box",
    "fit_growth",
    "recheck_affine",
    "recheck_growth",
]
