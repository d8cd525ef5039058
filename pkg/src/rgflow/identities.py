"""Right-hand sides of the evolution identities along the flow.

Each function returns what the time derivative of a quantity should be at a
given state; residuals compare these against central differences in time.
Metric quantities are those of ``g = exp(2u) h0``.

Pointwise gradient pairings use ``domain.dirichlet_density``: on the sphere
mesh the triangle-averaged gradient is more accurate but the cotangent
Laplacian only satisfies the product rule with the edge form, and these
identities are all product-rule consequences of the flow.
"""

import numpy as np

from .curvature import normalization_r, reaction, scalar_curvature, volume
from .surface import SurfaceKind


def laplacian_g(domain, state, a):
    return np.exp(-2.0 * state.u) * domain.laplacian(a)


def gradient_inner_g(domain, state, a, b):
    return np.exp(-2.0 * state.u) * domain.dirichlet_density(a, b)


def hessian_sq_g(domain, state, a):
    """``|Hess_g a|_g^2`` on the torus from spectral derivatives.

    The conformal Christoffel symbols give
    ``(Hess_g a)_ij = a_ij - (u_i a_j + u_j a_i - delta_ij <du, da>)``.
    """
    if domain.kind is not SurfaceKind.FLAT_TORUS:
        raise NotImplementedError("pointwise Hessians are only formed on the torus")
    axx, axy, ayy = domain.second_derivatives(a)
    ax, ay = domain.gradient(a)
    ux, uy = domain.gradient(state.u)
    dot = ux * ax + uy * ay
    hxx = axx - (2 * ux * ax - dot)
    hyy = ayy - (2 * uy * ay - dot)
    hxy = axy - (ux * ay + uy * ax)
    return np.exp(-4.0 * state.u) * (hxx**2 + 2 * hxy**2 + hyy**2)


def dR_dt(domain, state, params, R=None):
    """``(1 + a'R/2) Lap R + (a'/2) |grad R|^2 + R (R + a'R^2/4 - r)``."""
    ap = params.alpha_prime
    if R is None:
        R = scalar_curvature(domain, state)
    r = normalization_r(domain, state, params, R=R)
    return (
        (1.0 + 0.5 * ap * R) * laplacian_g(domain, state, R)
        + 0.5 * ap * gradient_inner_g(domain, state, R, R)
        + R * (reaction(R, ap) - r)
    )


def dR2_dt(domain, state, params, R=None):
    """``(1 + a'R/2) Lap R^2 - 2 |grad R|^2 + 2 R^2 (R + a'R^2/4 - r)``."""
    ap = params.alpha_prime
    if R is None:
        R = scalar_curvature(domain, state)
    r = normalization_r(domain, state, params, R=R)
    return (
        (1.0 + 0.5 * ap * R) * laplacian_g(domain, state, R * R)
        - 2.0 * gradient_inner_g(domain, state, R, R)
        + 2.0 * R * R * (reaction(R, ap) - r)
    )


def grad_R_sq(domain, state, R=None):
    if R is None:
        R = scalar_curvature(domain, state)
    return gradient_inner_g(domain, state, R, R)


def dgradR2_dt(domain, state, params, R=None):
    """Evolution of ``|grad R|^2``; needs the Hessian, so torus only.

    ``(1 + a'R/2)(Lap G - 2|Hess R|^2) + a'<grad G, grad R>
    + (4R - 3r + 5a'R^2/4 + a' Lap R) G`` with ``G = |grad R|^2``.
    """
    ap = params.alpha_prime
    if R is None:
        R = scalar_curvature(domain, state)
    r = normalization_r(domain, state, params, R=R)
    G = grad_R_sq(domain, state, R)
    lap_R = laplacian_g(domain, state, R)
    return (
        (1.0 + 0.5 * ap * R) * (laplacian_g(domain, state, G) - 2.0 * hessian_sq_g(domain, state, R))
        + ap * gradient_inner_g(domain, state, G, R)
        + (4.0 * R - 3.0 * r + 1.25 * ap * R * R + ap * lap_R) * G
    )


def dr_dt(domain, state, params, R=None):
    """``a'/(4 Vol) (-2 int (1 + a'R/2)|grad R|^2 + int (R^3 + a'R^4/4) - r int R^2)``."""
    ap = params.alpha_prime
    if R is None:
        R = scalar_curvature(domain, state)
    r = normalization_r(domain, state, params, R=R)
    w_h = domain.quadrature_weights
    grad_term = np.dot(w_h, (1.0 + 0.5 * ap * R) * domain.dirichlet_density(R, R))
    poly = domain.integrate(R**3 + 0.25 * ap * R**4, state.u)
    sq = domain.integrate(R * R, state.u)
    return ap / (4.0 * volume(domain, state)) * (-2.0 * grad_term + poly - r * sq)


def harnack_rhs(domain, state, params, R=None):
    """``dL/dt`` predicted by ``(1 + a'R/2) Q + |grad L|^2``."""
    from .potentials import harnack

    if R is None:
        R = scalar_curvature(domain, state)
    L, Q = harnack(domain, state, params, R=R)
    return (1.0 + 0.5 * params.alpha_prime * R) * Q + gradient_inner_g(domain, state, L, L)


def grad_L_sq_identity(domain, state, params, R):
    """Both sides of ``|grad L|^2 = (1 + a'R)|grad R|^2 / R^2 + (a'^2/4)|grad R|^2`` for a positive field ``R``."""
    ap = params.alpha_prime
    L = np.log(R) + 0.5 * ap * R
    gR = gradient_inner_g(domain, state, R, R)
    return gradient_inner_g(domain, state, L, L), (1.0 + ap * R) * gR / R**2 + 0.25 * ap**2 * gR


def dw_dt_torus(domain, state, params, R=None):
    """``(1 + a'R/4) Lap w`` for the mean-zero first-order potential (torus, ``a = 0``)."""
    from .potentials import potentials

    if R is None:
        R = scalar_curvature(domain, state)
    pair = potentials(domain, state, params, R=R)
    return (1.0 + 0.25 * params.alpha_prime * R) * laplacian_g(domain, state, pair.w)


def central_difference(t, values):
    """Second-order derivative at the middle of three (possibly uneven) samples."""
    (t0, t1, t2), (f0, f1, f2) = t, values
    h1, h2 = t1 - t0, t2 - t1
    return (-h2 / (h1 * (h1 + h2))) * f0 + ((h2 - h1) / (h1 * h2)) * f1 + (h1 / (h2 * (h1 + h2))) * f2
