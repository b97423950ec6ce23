"""Periodic rectangular grid, Fourier transforms and spectral calculus.

Fields live on an nx-by-ny collocation grid over (0, lx) x (0, ly) with
points x_j = j*lx/nx. Spectral coefficients follow the standard FFT layout
with the mean-normalized convention: coeff (0, 0) equals the field mean.
Differentiation multiplies by (i*xi)^order where xi = 2*pi*s/L and s is the
signed integer index; the Nyquist column is zeroed for odd orders (the
symmetric choice), kept for even orders so the Laplacian is the full
spectral one.

All operations are pure; transform plans are cached inside scipy.fft and
are safe to share between threads.
"""

import os
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .errors import GridMismatch, InvalidField, MeanNotZero

FFT_WORKERS = min(2, os.cpu_count() or 1)
_WORKERS = FFT_WORKERS


class Grid2D:
    """Periodic rectangular collocation grid.

    nx, ny must be even and at least 8. Wavenumber arrays are precomputed:
    ``kx``/``ky`` carry the full signed wavenumbers (Nyquist = -pi*n/L),
    ``kxd``/``kyd`` zero the Nyquist entry and drive odd-order derivatives.
    """

    def __init__(self, nx, ny, lx, ly):
        if nx < 8 or ny < 8 or nx % 2 or ny % 2:
            raise ValueError(f"grid dims must be even and >= 8, got {nx}x{ny}")
        if lx <= 0 or ly <= 0:
            raise ValueError("domain lengths must be positive")
        self.nx = int(nx)
        self.ny = int(ny)
        self.lx = float(lx)
        self.ly = float(ly)
        self.x = self.lx * np.arange(self.nx) / self.nx
        self.y = self.ly * np.arange(self.ny) / self.ny
        sx = np.fft.fftfreq(self.nx, d=1.0 / self.nx)  # signed integer indices
        sy = np.fft.fftfreq(self.ny, d=1.0 / self.ny)
        self.sx = sx
        self.sy = sy
        self.kx = 2.0 * np.pi * sx / self.lx
        self.ky = 2.0 * np.pi * sy / self.ly
        self.kxd = self.kx.copy()
        self.kxd[self.nx // 2] = 0.0
        self.kyd = self.ky.copy()
        self.kyd[self.ny // 2] = 0.0
        # Full spectral Laplacian symbol |xi|^2 and its pseudo-inverse.
        self.k2 = self.kx[:, None] ** 2 + self.ky[None, :] ** 2
        inv = self.k2.copy()
        inv[0, 0] = 1.0
        self.inv_k2 = 1.0 / inv
        self.inv_k2[0, 0] = 0.0
        # Gradient symbol used by H1 seminorms (Nyquist-zeroed).
        self.k2_grad = self.kxd[:, None] ** 2 + self.kyd[None, :] ** 2
        self.cell_weight = self.lx * self.ly / (self.nx * self.ny)
        self.area = self.lx * self.ly

    def meshgrid(self):
        """Broadcastable coordinate arrays X (nx,1), Y (1,ny)."""
        return self.x[:, None], self.y[None, :]

    def same_as(self, other):
        return (self.nx, self.ny, self.lx, self.ly) == (other.nx, other.ny, other.lx, other.ly)

    def __eq__(self, other):
        return isinstance(other, Grid2D) and self.same_as(other)

    def __hash__(self):
        return hash((self.nx, self.ny, self.lx, self.ly))

    def __repr__(self):
        return f"Grid2D({self.nx}, {self.ny}, lx={self.lx:g}, ly={self.ly:g})"


@dataclass
class RealField2D:
    """Physical-space scalar field, values[jx, jy] at (x[jx], y[jy])."""

    grid: Grid2D
    values: np.ndarray


@dataclass
class SpectralField2D:
    """Fourier coefficients of a real field; coeffs[jx, jy] in FFT layout.

    Hermitian symmetry coeffs[-j, -m] == conj(coeffs[j, m]) holds for any
    field produced by ``forward`` and is preserved by every operation here.
    """

    grid: Grid2D
    coeffs: np.ndarray


def _check_same_grid(a, b):
    if not a.grid.same_as(b.grid):
        raise GridMismatch(f"{a.grid!r} vs {b.grid!r}")


def forward(field):
    """Transform a RealField2D to coefficients (coeff(0,0) = mean)."""
    if not np.all(np.isfinite(field.values)):
        raise InvalidField("non-finite values in physical field")
    return SpectralField2D(field.grid, _fft.fft2(field.values, norm="forward", workers=_WORKERS))


def inverse(field):
    """Transform coefficients back to a RealField2D (real part taken)."""
    return RealField2D(field.grid, _fft.ifft2(field.coeffs, norm="forward", workers=_WORKERS).real)


def to_physical(field):
    """Physical values of a SpectralField2D (bare ndarray)."""
    return _fft.ifft2(field.coeffs, norm="forward", workers=_WORKERS).real


def field_from_function(grid, fn):
    """Sample fn(X, Y) on the grid and transform; fn gets broadcastable args."""
    x, y = grid.meshgrid()
    vals = np.broadcast_to(fn(x, y), (grid.nx, grid.ny)).astype(float)
    return forward(RealField2D(grid, vals))


def deriv(field, axis, order=1):
    """Spectral derivative of the given order along 'x' or 'y'."""
    if order < 1:
        raise ValueError("order must be a positive integer")
    g = field.grid
    if axis == "x":
        k = g.kxd if order % 2 else g.kx
        mult = (1j * k) ** order
        out = field.coeffs * mult[:, None]
    elif axis == "y":
        k = g.kyd if order % 2 else g.ky
        mult = (1j * k) ** order
        out = field.coeffs * mult[None, :]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return SpectralField2D(g, out)


def laplacian(field):
    """Full spectral Laplacian (Nyquist included), matching the solver symbol."""
    return SpectralField2D(field.grid, -field.grid.k2 * field.coeffs)


def inv_neg_laplacian(field):
    """Solve -Lap(psi) = field with the zero-mean gauge psi_hat(0,0) = 0."""
    c = field.coeffs
    scale = np.max(np.abs(c))
    if scale > 0 and abs(c[0, 0]) > 1e-10 * scale:
        raise MeanNotZero(f"mean coefficient {c[0, 0]:.3e} exceeds 1e-10 of scale {scale:.3e}")
    return SpectralField2D(field.grid, c * field.grid.inv_k2)


def inner(a, b):
    """Collocation L2 inner product (lx*ly/(nx*ny)) * sum(a*b) in physical space."""
    _check_same_grid(a, b)
    av = a.values if isinstance(a, RealField2D) else to_physical(a)
    bv = b.values if isinstance(b, RealField2D) else to_physical(b)
    return a.grid.cell_weight * float(np.dot(av.ravel(), bv.ravel()))


def coeff_inner(a, b):
    """Same inner product accumulated in coefficient space (Parseval)."""
    _check_same_grid(a, b)
    return a.grid.area * float(np.vdot(a.coeffs, b.coeffs).real)


def coeff_l2sq(field):
    """||f||^2 via Parseval."""
    return field.grid.area * float(np.vdot(field.coeffs, field.coeffs).real)


def _weighted_coeff_sq(weight, coeffs):
    return float(
        np.einsum("ij,ij,ij->", weight, coeffs.real, coeffs.real)
        + np.einsum("ij,ij,ij->", weight, coeffs.imag, coeffs.imag)
    )


def dirichlet_form(field):
    """<-Lap f, f> with the full solver Laplacian; equals ||grad f||^2 up to Nyquist."""
    return field.grid.area * _weighted_coeff_sq(field.grid.k2, field.coeffs)


def norms(field):
    """(l2, h1 seminorm, linf) of a spectral field."""
    phys = to_physical(field)
    l2 = np.sqrt(max(field.grid.cell_weight * float(np.dot(phys.ravel(), phys.ravel())), 0.0))
    h1 = np.sqrt(max(field.grid.area * _weighted_coeff_sq(field.grid.k2_grad, field.coeffs), 0.0))
    linf = float(np.max(np.abs(phys)))
    return l2, h1, linf


def dealias_23(field):
    """Zero every mode with |s| > n/3 in either direction (2/3 rule)."""
    g = field.grid
    keep = (np.abs(g.sx)[:, None] <= g.nx / 3.0) & (np.abs(g.sy)[None, :] <= g.ny / 3.0)
    return SpectralField2D(g, np.where(keep, field.coeffs, 0.0))


def hermitian_defect(field):
    """Max relative deviation from Hermitian symmetry (0 for real fields)."""
    c = field.coeffs
    mirrored = np.conj(c[np.ix_(-np.arange(c.shape[0]) % c.shape[0], -np.arange(c.shape[1]) % c.shape[1])])
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(c - mirrored)) / scale)


def zero_field(grid):
    return SpectralField2D(grid, np.zeros((grid.nx, grid.ny), dtype=complex))
