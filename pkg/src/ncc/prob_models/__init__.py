"""Probability models that feed the entropy coders."""
from .context import ContextModel, context_predict, context_update
from .densities import FAMILIES, DiscretizedDensity, discretize, uniform_box
from .fitting import (
    SCALE_FLOOR,
    DensityFit,
    DequantizationGap,
    dequantization_gap,
    fit_categorical,
    fit_discretized,
    fit_ml,
)
from .info import Categorical, cross_entropy, empirical_entropy, entropy, kl
from .mixture import GatedMixturePredictor

__all__ = [
    "Categorical",
    "ContextModel",
    "DensityFit",
    "DequantizationGap",
    "DiscretizedDensity",
    "FAMILIES",
    "GatedMixturePredictor",
    "SCALE_FLOOR",
    "context_predict",
    "context_update",
    "cross_entropy",
    "dequantization_gap",
    "discretize",
    "empirical_entropy",
    "entropy",
    "fit_categorical",
    "fit_discretized",
    "fit_ml",
    "kl",
    "uniform_box",
]
