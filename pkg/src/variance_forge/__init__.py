"""variance-forge: find the data/configuration perturbation that moves a
small classifier's evaluation score the most.

A perturbation strategy picks one level per factor (adversarial inputs,
distribution shift, label flipping, label noise, weight/bias noise, a wider
first hidden layer, replaced training seeds). Each strategy is scored by
training under it and measuring how far the confidence-gap metric moves
from the unperturbed baseline; search engines then look for the strategy
with the largest movement.
"""

__version__ = "0.1.0"

from ._kernel import BACKEND as KERNEL_BACKEND
from .errors import (
    BudgetExhausted,
    ConfigError,
    DataError,
    DivergenceError,
    ShapeError,
    VarianceForgeError,
)

__all__ = [
    "KERNEL_BACKEND",
    "BudgetExhausted",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "ShapeError",
    "VarianceForgeError",
    "__version__",
]
