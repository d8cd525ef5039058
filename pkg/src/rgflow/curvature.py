"""Scalar curvature of conformal metrics, the normalization functional and the M+ cone test."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .surface import SurfaceDomain

CONE_MARGIN = 1e-12


class Cone(enum.Enum):
    ALL_PLUS = "AllPlus"
    ALL_MINUS = "AllMinus"
    MIXED = "Mixed"


@dataclass(frozen=True)
class ConformalState:
    """Conformal factor ``u`` at time ``t``; the metric is ``g = exp(2u) h0``."""

    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1:
            raise ValueError("conformal factor must be a flat node field")
        if not np.all(np.isfinite(u)):
            raise ValueError("conformal factor must be finite at every node")
        object.__setattr__(self, "u", u)

    def shifted(self, du=0.0, dt=0.0):
        return replace(self, u=self.u + du, t=self.t + dt)


@dataclass(frozen=True)
class FlowParams:
    """Coupling, time-stepping policy and run horizon.

    Attributes
    ----------
    alpha_prime : float
        Coupling constant, ``>= 0``. ``0`` gives normalized Ricci flow.
    dt_safety : float
        Fraction of the explicit stability bound used as step size, in ``(0, 1]``.
    t_end : float
        Run horizon.
    sample_stride : int
        Integrator steps between stored samples.
    residual_check_stride : int
        Samples between evaluations of the expensive diagnostics
        (potentials, entropy, Harnack, PDE residual).
    entropy_floor : float
        Minimum scalar curvature accepted by ``log R`` based quantities.
    dt_fixed : float or None
        Use this step instead of the curvature-dependent bound.
    """

    alpha_prime: float = 0.0
    dt_safety: float = 0.9
    t_end: float = 1.0
    sample_stride: int = 50
    residual_check_stride: int = 1
    entropy_floor: float = 1e-8
    dt_fixed: float | None = None

    def __post_init__(self):
        if not self.alpha_prime >= 0:
            raise ValueError("alpha_prime must be nonnegative")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.sample_stride < 1 or self.residual_check_stride < 1:
            raise ValueError("strides must be positive integers")
        if not self.entropy_floor > 0:
            raise ValueError("entropy_floor must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise ValueError("dt_fixed must be positive")


def scalar_curvature(domain: SurfaceDomain, state: ConformalState) -> np.ndarray:
    """``R_g = exp(-2u) (R_h - 2 Laplacian_h u)`` at every node."""
    lap_u = domain.laplacian(state.u)
    return domain.pointwise(
        lambda u, lu, rh: np.exp(-2.0 * u) * (rh - 2.0 * lu),
        state.u,
        lap_u,
        domain.background_scalar_curvature,
    )


def reaction(R, alpha_prime):
    """``R + alpha' R^2 / 4``, the curvature term driving the flow."""
    return R + 0.25 * alpha_prime * R * R


def volume(domain, state):
    return domain.integrate(1.0, state.u)


def normalization_r(domain, state, params, R=None):
    """Area average of ``R + alpha' R^2 / 4`` against ``dmu_g``."""
    if R is None:
        R = scalar_curvature(domain, state)
    F = domain.pointwise(lambda x: reaction(x, params.alpha_prime), R)
    return domain.integrate(F, state.u) / volume(domain, state)


def cone_classify(domain, state, params, R=None):
    """Classify the state against ``M+ = {1 + alpha' R / 2 > 0}`` and ``M-``."""
    if R is None:
        R = scalar_curvature(domain, state)
    s = 1.0 + 0.5 * params.alpha_prime * R
    if s.min() > CONE_MARGIN:
        return Cone.ALL_PLUS
    if s.max() < -CONE_MARGIN:
        return Cone.ALL_MINUS
    return Cone.MIXED


def r_lower_bounds_check(r, domain, state, params, tol=1e-8):
    """Check ``r >= -1/alpha'`` and ``r >= 2 pi chi / Vol(M, g)``.

    The first bound is reported as satisfied when ``alpha' = 0``.
    """
    young = True if params.alpha_prime == 0 else r >= -1.0 / params.alpha_prime - tol
    topo = r >= 2.0 * np.pi * domain.euler_characteristic / volume(domain, state) - tol
    return bool(young), bool(topo)
