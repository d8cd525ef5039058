"""Pseudospectral flat torus."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .domain import SurfaceDomain, SurfaceKind


@dataclass(frozen=True, eq=False)
class TorusDomain(SurfaceDomain):
    """Uniform periodic grid on ``[0, Lx) x [0, Ly)`` with spectral derivatives.

    Node fields are flat arrays in row-major ``(ix, iy)`` order.
    """

    nx: int = 0
    ny: int = 0
    lx: float = 1.0
    ly: float = 1.0
    dealias: bool = False
    _kx: np.ndarray = field(default=None, repr=False)
    _ky: np.ndarray = field(default=None, repr=False)
    _lap_symbol: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def spacing(self):
        return max(self.lx / self.nx, self.ly / self.ny)

    def _grid(self, a):
        return np.asarray(a, dtype=float).reshape(self.nx, self.ny)

    def _spec(self, a):
        return sfft.rfft2(self._grid(a))

    def _phys(self, a_hat):
        return sfft.irfft2(a_hat, s=self.shape).ravel()

    def laplacian(self, a):
        return self._phys(self._lap_symbol * self._spec(a))

    def gradient(self, a):
        """Spectral partial derivatives ``(da/dx, da/dy)`` with Nyquist modes removed."""
        a_hat = self._spec(a)
        return (
            self._phys(1j * self._kx * a_hat),
            self._phys(1j * self._ky * a_hat),
        )

    def second_derivatives(self, a):
        """Spectral ``(a_xx, a_xy, a_yy)``."""
        a_hat = self._spec(a)
        return (
            self._phys(-self._kx**2 * a_hat),
            self._phys(-self._kx * self._ky * a_hat),
            self._phys(-self._ky**2 * a_hat),
        )

    def gradient_inner(self, a, b):
        ax, ay = self.gradient(a)
        if b is a:
            return ax * ax + ay * ay
        bx, by = self.gradient(b)
        return ax * bx + ay * by

    def solve_laplacian(self, rhs):
        rhs_hat = self._spec(rhs)
        sym = self._lap_symbol.copy()
        sym[0, 0] = 1.0
        phi_hat = rhs_hat / sym
        phi_hat[0, 0] = 0.0
        return self._phys(phi_hat)

    def pointwise(self, func, *fields):
        if not self.dealias:
            return func(*fields)
        return self._dealiased(func, *fields)

    def _dealiased(self, func, *fields):
        # 3/2-rule: evaluate on a padded grid, then truncate back to the resolved modes
        mx, my = 3 * self.nx // 2, 3 * self.ny // 2
        padded = [self._pad(f, mx, my) for f in fields]
        out = func(*padded)
        out_hat = sfft.fft2(out.reshape(mx, my))
        return self._unpad(out_hat, mx, my)

    def _pad(self, a, mx, my):
        nx, ny = self.nx, self.ny
        a_hat = sfft.fft2(self._grid(a))
        a_hat[nx // 2, :] = 0.0
        a_hat[:, ny // 2] = 0.0
        big = np.zeros((mx, my), dtype=complex)
        hx, hy = nx // 2, ny // 2
        big[:hx, :hy] = a_hat[:hx, :hy]
        big[:hx, -hy:] = a_hat[:hx, -hy:]
        big[-hx:, :hy] = a_hat[-hx:, :hy]
        big[-hx:, -hy:] = a_hat[-hx:, -hy:]
        return (sfft.ifft2(big).real * (mx * my) / (nx * ny)).ravel()

    def _unpad(self, big, mx, my):
        nx, ny = self.nx, self.ny
        hx, hy = nx // 2, ny // 2
        a_hat = np.zeros((nx, ny), dtype=complex)
        a_hat[:hx, :hy] = big[:hx, :hy]
        a_hat[:hx, -hy:] = big[:hx, -hy:]
        a_hat[-hx:, :hy] = big[-hx:, :hy]
        a_hat[-hx:, -hy:] = big[-hx:, -hy:]
        return (sfft.ifft2(a_hat).real * (nx * ny) / (mx * my)).ravel()


def build_torus(n_x, n_y, L_x=1.0, L_y=1.0, dealias=False):
    """Flat torus ``R^2 / (L_x Z x L_y Z)`` sampled on an ``n_x x n_y`` grid.

    The Laplacian is applied in Fourier space with symbol
    ``-(2 pi k_x / L_x)**2 - (2 pi k_y / L_y)**2``.

    Parameters
    ----------
    n_x, n_y : int
        Grid resolution; both must be even and at least 8.
    L_x, L_y : float
        Side lengths.
    dealias : bool
        Evaluate pointwise nonlinearities with the 3/2 padding rule.
    """
    for n in (n_x, n_y):
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"torus resolution must be an even integer >= 8, got {n}")
    if L_x <= 0 or L_y <= 0:
        raise ValueError("torus side lengths must be positive")
    n_x, n_y = int(n_x), int(n_y)
    x = np.arange(n_x) * (L_x / n_x)
    y = np.arange(n_y) * (L_y / n_y)
    X, Y = np.meshgrid(x, y, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])

    kx = 2 * np.pi * sfft.fftfreq(n_x, d=L_x / n_x)
    ky = 2 * np.pi * sfft.rfftfreq(n_y, d=L_y / n_y)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    lap = -(KX**2) - KY**2
    # first derivatives lose the Nyquist mode, whose derivative is not real
    KXd = KX.copy()
    KYd = KY.copy()
    KXd[n_x // 2, :] = 0.0
    KYd[:, n_y // 2] = 0.0

    n = n_x * n_y
    lam_max = -((np.pi * n_x / L_x) ** 2) - (np.pi * n_y / L_y) ** 2
    return TorusDomain(
        kind=SurfaceKind.FLAT_TORUS,
        node_count=n,
        background_scalar_curvature=np.zeros(n),
        quadrature_weights=np.full(n, L_x * L_y / n),
        points=points,
        lambda_max=lam_max,
        nx=n_x,
        ny=n_y,
        lx=float(L_x),
        ly=float(L_y),
        dealias=bool(dealias),
        _kx=KXd,
        _ky=KYd,
        _lap_symbol=lap,
    )
