"""Named initial conformal factors.

On the torus ``sinusoid`` is ``A cos(2 pi kx x / Lx) cos(2 pi ky y / Ly)``.
On the sphere it is ``A Re((x + i y)^kx) z^ky`` in ambient coordinates of the
unit sphere, a polynomial and hence smooth; ``kx = 2, ky = 0`` is the
degree-two harmonic ``x^2 - y^2``.

``bump`` is a smooth periodic (torus) or zonal (sphere) bump that looks like
``height * exp(-d^2 / (2 width^2))`` near its center.
"""

import numpy as np

from .surface import SurfaceKind

ANSATZE = ("flat", "sinusoid", "bump", "file")


def flat(domain):
    return np.zeros(domain.node_count)


def sinusoid(domain, amplitude=0.1, kx=1, ky=1):
    p = domain.points
    if domain.kind is SurfaceKind.FLAT_TORUS:
        x, y = p[:, 0], p[:, 1]
        return amplitude * np.cos(2 * np.pi * kx * x / domain.lx) * np.cos(2 * np.pi * ky * y / domain.ly)
    q = p / np.linalg.norm(p, axis=1, keepdims=True)
    return amplitude * np.real((q[:, 0] + 1j * q[:, 1]) ** int(kx)) * q[:, 2] ** int(ky)


def bump(domain, center=(0.0, 0.0, 1.0), width=0.3, height=0.1):
    if not width > 0:
        raise ValueError("bump width must be positive")
    p = domain.points
    if domain.kind is SurfaceKind.FLAT_TORUS:
        kx, ky = 2 * np.pi / domain.lx, 2 * np.pi / domain.ly
        dx = p[:, 0] - center[0]
        dy = p[:, 1] - center[1]
        expo = (np.cos(kx * dx) - 1) / (kx * width) ** 2 + (np.cos(ky * dy) - 1) / (ky * width) ** 2
        return height * np.exp(expo)
    c = np.asarray(center, dtype=float)
    if c.shape != (3,) or not np.linalg.norm(c) > 0:
        raise ValueError("sphere bump center must be a nonzero 3-vector")
    c = c / np.linalg.norm(c)
    q = p / np.linalg.norm(p, axis=1, keepdims=True)
    rho = domain.radius
    return height * np.exp((q @ c - 1.0) * rho**2 / width**2)


def from_file(domain, path):
    """Flat little-endian float64 node values in node order."""
    u = np.fromfile(path, dtype="<f8")
    if u.size != domain.node_count:
        raise ValueError(f"{path}: {u.size} values for {domain.node_count} nodes")
    return u


def initial_field(domain, ansatz, **kwargs):
    if ansatz == "flat":
        return flat(domain)
    if ansatz == "sinusoid":
        return sinusoid(domain, **kwargs)
    if ansatz == "bump":
        return bump(domain, **kwargs)
    if ansatz == "file":
        return from_file(domain, **kwargs)
    raise ValueError(f"unknown initial ansatz {ansatz!r}")
