"""Built-in problem drivers."""

from .affine import AffineConfig, AffineFamilyProblem
from .laplace_bie import BieConfig, LaplaceBieProblem
from .transport import RteConfig, TransportProblem

__all__ = [
    "AffineConfig",
    "AffineFamilyProblem",
    "BieConfig",
    "LaplaceBieProblem",
    "RteConfig",
    "TransportProblem",
]
