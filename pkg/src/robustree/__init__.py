"""Robust merits of noisy inputs from tree-based surrogates."""

from .errors import ConsistencyError, InvalidInputError, UnsupportedOperationError
from .dataset import Column, Dataset, load_dataset, load_schema
from .noise import (BoundedGamma, CategoricalSimplex, Delta, DiscreteLaplace, Normal,
                    ShiftedPoisson, TruncatedNormal, Uniform, load_noise)
from .trees import Forest, Tile, Tree, TreeParams, extract_tiles, fit, predict
from .estimator import (RobustEstimate, estimate, expectation, lower_confidence_expectation,
                        reweight, second_moment, tile_probability)
from .scalarize import Objective, Scalarizer, scalarize, threshold_hierarchy, weighted_sum

__all__ = [
    "BoundedGamma", "CategoricalSimplex", "Column", "ConsistencyError", "Dataset", "Delta",
    "DiscreteLaplace", "Forest", "InvalidInputError", "Normal", "Objective", "RobustEstimate",
    "Scalarizer", "ShiftedPoisson", "Tile", "Tree", "TreeParams", "TruncatedNormal", "Uniform",
    "UnsupportedOperationError", "estimate", "expectation", "extract_tiles", "fit",
    "load_dataset", "load_noise", "load_schema", "lower_confidence_expectation", "predict",
    "reweight", "scalarize", "second_moment", "threshold_hierarchy", "tile_probability",
    "weighted_sum",
]
__version__ = "0.1.0"
