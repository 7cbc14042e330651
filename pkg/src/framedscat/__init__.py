"""Constructive scattering theory for frame-sandwiched operator models."""
from .linalg_core import EigenSystem, NotPSDError, fredholm_det, hermitian_eig, pinv_rank, psd_sqrt
from .models import (
    BoundaryFamily,
    FiniteHermitian,
    Frame,
    FreeJacobi,
    MultiplicationGrid,
    NotInLambdaError,
    Perturbation,
    ResonanceError,
    SandwichedResolvent,
    boundary_resolvent,
    hilbert_scale_rescale,
    sandwiched_resolvent,
)

__version__ = "0.1.0"
SPEC_VERSION = "1.0"

__all__ = [
    "EigenSystem", "NotPSDError", "fredholm_det", "hermitian_eig", "pinv_rank", "psd_sqrt",
    "BoundaryFamily", "FiniteHermitian", "Frame", "FreeJacobi", "MultiplicationGrid",
    "NotInLambdaError", "Perturbation", "ResonanceError", "SandwichedResolvent",
    "boundary_resolvent", "hilbert_scale_rescale", "sandwiched_resolvent",
]
