"""Numerical certificates for isoperimetric fibers in warped products with density."""

from .classifier import CertificationReport, classify, classify_conformal_plane
from .expr import differentiate, evaluate, parse
from .geometry import SpaceSpec, classify_finiteness, euclidean_punctured, fiber_area, reflect
from .model import ModelSpace, reduce, verify_preservation
from .profile import build_profile, check_convexity, envelope, lower_hull
from .verify import (DiscreteFiberSpace, GraphSurface, RevolutionSurface, jensen_check,
                     nonconvex_counterexample, perturb_sphere)

__all__ = [
    "CertificationReport", "DiscreteFiberSpace", "GraphSurface", "ModelSpace", "RevolutionSurface",
    "SpaceSpec", "build_profile", "check_convexity", "classify", "classify_conformal_plane",
    "classify_finiteness", "differentiate", "envelope", "euclidean_punctured", "evaluate",
    "fiber_area", "jensen_check", "lower_hull", "nonconvex_counterexample", "parse",
    "perturb_sphere", "reduce", "reflect", "verify_preservation",
]
__version__ = "0.1.0"
