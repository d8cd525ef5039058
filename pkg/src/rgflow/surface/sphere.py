"""Cotangent-Laplacian round sphere."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import SurfaceDomain, SurfaceKind
from .icosphere import icosphere

MAX_SUBDIVISIONS = 8


@dataclass(frozen=True, eq=False)
class SphereDomain(SurfaceDomain):
    """Icosphere of radius ``radius`` with lumped-mass cotangent Laplacian.

    ``laplacian(a) = (W @ a) / A`` where ``W`` is the symmetric cotangent
    stiffness matrix (zero row sums) and ``A`` the lumped circumcentric
    (Voronoi) vertex areas, which are also the quadrature weights.
    """

    radius: float = 1.0
    subdivisions: int = 0
    faces: np.ndarray = field(default=None, repr=False)
    stiffness: sp.csr_matrix = field(default=None, repr=False)
    face_areas: np.ndarray = field(default=None, repr=False)
    _grad_basis: np.ndarray = field(default=None, repr=False)
    _face_to_vertex: sp.csr_matrix = field(default=None, repr=False)

    @property
    def spacing(self):
        e = self.points[self.faces[:, 1]] - self.points[self.faces[:, 0]]
        return float(np.linalg.norm(e, axis=1).mean())

    def laplacian(self, a):
        return (self.stiffness @ np.asarray(a, dtype=float)) / self.quadrature_weights

    def face_gradients(self, a):
        """Constant gradient of the piecewise-linear interpolant on each triangle, ``(m, 3)``."""
        a = np.asarray(a, dtype=float)
        return np.einsum("fk,fkd->fd", a[self.faces], self._grad_basis)

    def gradient_inner(self, a, b):
        ga = self.face_gradients(a)
        gb = ga if b is a else self.face_gradients(b)
        per_face = np.einsum("fd,fd->f", ga, gb)
        return self._face_to_vertex @ per_face

    def dirichlet_density(self, a, b):
        # edge form 1/2 sum_j w_ij (a_j - a_i)(b_j - b_i) / A_i of the cotangent operator
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        lap = self.laplacian
        return 0.5 * (lap(a * b) - a * lap(b) - b * lap(a))

    def solve_laplacian(self, rhs, rtol=1e-10, maxiter=None):
        b = -np.asarray(rhs, dtype=float) * self.quadrature_weights
        b -= b.mean()
        n = self.node_count
        maxiter = maxiter or 10 * n
        diag = -self.stiffness.diagonal()
        precond = spla.LinearOperator((n, n), matvec=lambda x: x / diag, dtype=float)
        phi, info = spla.cg(-self.stiffness, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond)
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge in {maxiter} iterations")
        w = self.quadrature_weights
        return phi - np.dot(phi, w) / w.sum()


def _mixed_corner_areas(verts, faces, cots, area):
    """Share of each triangle's area assigned to its corners (circumcentric Voronoi cells).

    Obtuse triangles fall back to half/quarter splits so the shares stay
    positive; either way the three shares sum to the triangle area.
    """
    sq = np.empty_like(cots)
    for k in range(3):
        e = verts[faces[:, (k + 2) % 3]] - verts[faces[:, (k + 1) % 3]]
        sq[:, k] = np.einsum("fd,fd->f", e, e)  # edge opposite corner k
    shares = np.empty_like(cots)
    for k in range(3):
        j, l = (k + 1) % 3, (k + 2) % 3
        # edges (k, j) and (k, l) are opposite corners l and j
        shares[:, k] = (sq[:, l] * cots[:, l] + sq[:, j] * cots[:, j]) / 8.0
    obtuse = (cots < 0).any(axis=1)
    if obtuse.any():
        at_obtuse = cots[obtuse] < 0
        shares[obtuse] = np.where(at_obtuse, 0.5, 0.25) * area[obtuse, None]
    return shares


def _cotangent_operators(verts, faces):
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    twice_area = np.linalg.norm(cross, axis=1)
    area = 0.5 * twice_area
    normal = cross / twice_area[:, None]

    n = len(verts)
    m = len(faces)
    rows, cols, vals = [], [], []
    cots = np.empty((m, 3))
    corners = [(p0, p1, p2), (p1, p2, p0), (p2, p0, p1)]
    for k, (pa, pb, pc) in enumerate(corners):
        # angle at pa is opposite the edge (pb, pc)
        u, v = pb - pa, pc - pa
        cot = np.einsum("fd,fd->f", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        cots[:, k] = cot
        ib, ic = faces[:, (k + 1) % 3], faces[:, (k + 2) % 3]
        rows += [ib, ic]
        cols += [ic, ib]
        vals += [0.5 * cot, 0.5 * cot]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    stiffness = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()

    corner_area = _mixed_corner_areas(verts, faces, cots, area)
    lumped = np.bincount(faces.ravel(), weights=corner_area.ravel(), minlength=n)

    # grad(phi_i) on a face is (n x e_opposite) / (2 area), e_opposite oriented ccw
    basis = np.stack(
        [
            np.cross(normal, p2 - p1),
            np.cross(normal, p0 - p2),
            np.cross(normal, p1 - p0),
        ],
        axis=1,
    ) / twice_area[:, None, None]

    f2v = sp.csr_matrix(
        (corner_area.ravel(), (faces.ravel(), np.repeat(np.arange(m), 3))), shape=(n, m)
    )
    f2v = sp.diags(1.0 / lumped) @ f2v
    return stiffness, lumped, area, basis, f2v.tocsr()


def _power_iteration(stiffness, weights, tol=1e-11, maxiter=20000):
    # symmetric similarity transform of M^{-1} W; stops when the Rayleigh
    # quotient stagnates, which is slow near the clustered top of the spectrum
    s = 1.0 / np.sqrt(weights)
    op = sp.diags(s) @ stiffness @ sp.diags(s)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(len(weights))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(maxiter):
        y = op @ x
        lam_new = float(np.dot(x, y))
        x = y / np.linalg.norm(y)
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def build_sphere(subdivisions, radius=1.0):
    """Round sphere of radius ``radius`` as a geodesic icosphere.

    Parameters
    ----------
    subdivisions : int
        Midpoint-subdivision level, ``0 <= subdivisions <= 8``.
    radius : float
        Sphere radius ``rho``; the background curvature is ``2 / rho**2``.

    Notes
    -----
    ``lambda_max`` is estimated by power iteration on the symmetrized
    operator and only used for the explicit step-size bound.
    """
    if int(subdivisions) != subdivisions or not 0 <= subdivisions <= MAX_SUBDIVISIONS:
        raise ValueError(f"subdivisions must be an integer in [0, {MAX_SUBDIVISIONS}]")
    if radius <= 0:
        raise ValueError("radius must be positive")
    verts, faces = icosphere(int(subdivisions), radius)
    stiffness, lumped, face_area, basis, f2v = _cotangent_operators(verts, faces)
    n = len(verts)
    return SphereDomain(
        kind=SurfaceKind.ROUND_SPHERE,
        node_count=n,
        background_scalar_curvature=np.full(n, 2.0 / radius**2),
        quadrature_weights=lumped,
        points=verts,
        lambda_max=_power_iteration(stiffness, lumped),
        radius=float(radius),
        subdivisions=int(subdivisions),
        faces=faces,
        stiffness=stiffness,
        face_areas=face_area,
        _grad_basis=basis,
        _face_to_vertex=f2v,
    )
