"""Fixed-rank tensor-train solvers for kinetic equations via projector splitting."""

from .tt_core import CanonicalForm, TensorTrain3
from .projector_splitting import PropagatorPair, RhsTerms, SpatialTTField, lie_step, strang_step
from .models import ModelConfig

__all__ = [
    "TensorTrain3",
    "CanonicalForm",
    "RhsTerms",
    "PropagatorPair",
    "SpatialTTField",
    "lie_step",
    "strang_step",
    "ModelConfig",
]
__version__ = "0.1.0"
