"""Discretized closed surfaces: flat torus (spectral) and round sphere (cotangent mesh)."""

from .domain import SurfaceDomain, SurfaceKind
from .sphere import SphereDomain, build_sphere
from .torus import TorusDomain, build_torus

__all__ = [
    "SurfaceDomain",
    "SurfaceKind",
    "SphereDomain",
    "TorusDomain",
    "build_sphere",
    "build_torus",
    "laplacian",
    "gradient_sq",
    "gradient_inner",
    "integrate",
]


def laplacian(domain, field):
    """Background Laplace-Beltrami operator (nonpositive spectrum)."""
    return domain.laplacian(field)


def gradient_sq(domain, field):
    """Pointwise ``|grad field|^2`` with respect to the background metric.

    Spectral derivatives on the torus; on the sphere, per-triangle gradients
    of the linear interpolant averaged to vertices with area weights.
    """
    return domain.gradient_inner(field, field)


def gradient_inner(domain, a, b):
    return domain.gradient_inner(a, b)


def integrate(domain, field, conformal_u=None):
    """Integral of ``field`` against ``dmu_g = exp(2u) dmu_h``."""
    return domain.integrate(field, conformal_u)
