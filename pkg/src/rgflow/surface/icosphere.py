"""Geodesic icosphere generation by midpoint subdivision."""

import numpy as np


def icosahedron():
    """Return vertices (on the unit sphere) and outward-oriented faces."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return verts, faces


def subdivide(verts, faces):
    """Split every triangle into four, projecting new midpoints to the unit sphere."""
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mid = verts[unique[:, 0]] + verts[unique[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)

    nf = len(faces)
    m01 = inverse[:nf] + len(verts)
    m12 = inverse[nf:2 * nf] + len(verts)
    m20 = inverse[2 * nf:] + len(verts)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([verts, mid]), new_faces


def icosphere(subdivisions, radius=1.0):
    """Geodesic icosphere with ``10 * 4**subdivisions + 2`` vertices.

    Parameters
    ----------
    subdivisions : int
        Number of midpoint-subdivision passes applied to the icosahedron.
    radius : float
        Sphere radius; vertices lie exactly on it.

    Returns
    -------
    verts : (n, 3) ndarray
    faces : (m, 3) int ndarray
        Counter-clockwise when seen from outside.
    """
    verts, faces = icosahedron()
    for _ in range(subdivisions):
        verts, faces = subdivide(verts, faces)
    return radius * verts, faces
