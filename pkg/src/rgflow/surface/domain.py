"""Common interface of the discretized background surfaces."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class SurfaceKind(enum.Enum):
    FLAT_TORUS = "torus"
    ROUND_SPHERE = "sphere"

    @property
    def euler_characteristic(self):
        return 0 if self is SurfaceKind.FLAT_TORUS else 2


@dataclass(frozen=True, eq=False)
class SurfaceDomain:
    """A closed surface with background metric ``h0`` sampled at nodes.

    Attributes
    ----------
    kind : SurfaceKind
    node_count : int
    background_scalar_curvature : ndarray
        Scalar curvature of ``h0`` per node (0 on the torus, ``2 / rho**2`` on the sphere).
    quadrature_weights : ndarray
        Background area element per node; sums to the background area.
    points : ndarray
        Node coordinates, ``(n, 2)`` on the torus and ``(n, 3)`` on the sphere.
    lambda_max : float
        Most negative eigenvalue of the discrete Laplacian.

    The Laplacian is ``div grad`` and has nonpositive spectrum.
    """

    kind: SurfaceKind
    node_count: int
    background_scalar_curvature: np.ndarray
    quadrature_weights: np.ndarray
    points: np.ndarray
    lambda_max: float

    def __post_init__(self):
        for arr in (self.background_scalar_curvature, self.quadrature_weights, self.points):
            arr.flags.writeable = False

    @property
    def euler_characteristic(self):
        return self.kind.euler_characteristic

    @property
    def area(self):
        return float(self.quadrature_weights.sum())

    def laplacian(self, a):
        raise NotImplementedError

    def gradient_inner(self, a, b):
        """Pointwise ``<grad a, grad b>`` with respect to ``h0``."""
        raise NotImplementedError

    def dirichlet_density(self, a, b):
        """``<grad a, grad b>`` in the form ``(Lap(ab) - a Lap b - b Lap a) / 2``.

        This is the gradient pairing the discrete Laplacian obeys a product
        rule with; it integrates to the same Dirichlet form as
        ``gradient_inner``. Defaults to ``gradient_inner`` where the two coincide.
        """
        return self.gradient_inner(a, b)

    def solve_laplacian(self, rhs):
        """Mean-zero (w.r.t. ``h0``) solution of ``Laplacian(phi) = rhs``; ``rhs`` must have zero mean."""
        raise NotImplementedError

    def pointwise(self, func, *fields):
        """Evaluate a pointwise nonlinearity of node fields."""
        return func(*fields)

    def integrate(self, a, conformal_u=None):
        a = np.asarray(a, dtype=float)
        if conformal_u is None:
            return float(np.dot(a, self.quadrature_weights))
        return float(np.dot(a * np.exp(2.0 * conformal_u), self.quadrature_weights))
