"""Navier-Stokes terms: advection, forcings, manufactured solution, velocity ops.

Conventions (consistent set for the streamfunction-vorticity form):
    u = (d_y psi, -d_x psi),   omega = curl u = d_x u2 - d_y u1 = -Lap psi,
    advection of vorticity = u . grad omega = psi_y * omega_x - psi_x * omega_y.
With these, curl((u.grad)u) = u.grad(omega) holds discretely on resolved
fields, and the basic Kolmogorov flow psi = sin(m y) driven by the velocity
forcing (m^3/Re) cos(m y) e_x is an exact steady state.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as _fft

from . import spectral as sp
from .errors import DomainMismatch, GridMismatch

TWO_PI = 2.0 * np.pi
_WORKERS = sp.FFT_WORKERS


@dataclass(frozen=True)
class ForcingSpec:
    """Forcing selector: kolmogorov (wavenumber m, amplitude from re), manufactured, none."""

    kind: str  # "kolmogorov" | "manufactured" | "none"
    m: int = 2
    re: float = 1.0

    def __post_init__(self):
        if self.kind not in ("kolmogorov", "manufactured", "none"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("forcing wavenumber m must be >= 1")


def jacobian(psi, omega, dealias=False):
    """Vorticity advection u.grad(omega) with u = (psi_y, -psi_x).

    Derivatives are spectral, products are formed at the collocation points
    (pseudo-spectral). With dealias the 2/3 rule is applied to both inputs
    and to the product.
    """
    if not psi.grid.same_as(omega.grid):
        raise GridMismatch(f"{psi.grid!r} vs {omega.grid!r}")
    if dealias:
        psi = sp.dealias_23(psi)
        omega = sp.dealias_23(omega)
    g = psi.grid
    dx = (1j * g.kxd)[:, None]
    dy = (1j * g.kyd)[None, :]
    batch = np.empty((4, g.nx, g.ny), dtype=complex)
    np.multiply(dy, psi.coeffs, out=batch[0])    # u1 = psi_y
    np.multiply(dx, psi.coeffs, out=batch[1])    # psi_x (u2 = -psi_x)
    np.multiply(dx, omega.coeffs, out=batch[2])  # omega_x
    np.multiply(dy, omega.coeffs, out=batch[3])  # omega_y
    u1, psix, omx, omy = _fft.ifft2(batch, norm="forward", axes=(-2, -1), workers=_WORKERS).real
    nl = sp.SpectralField2D(
        g, _fft.fft2(u1 * omx - psix * omy, norm="forward", workers=_WORKERS)
    )
    if dealias:
        nl = sp.dealias_23(nl)
    return nl


def kolmogorov_vorticity_forcing(grid, m, re):
    """Curl of the Kolmogorov velocity forcing: (m^4/Re) sin(m y), built exactly."""
    if abs(grid.lx - TWO_PI) > 1e-12 * TWO_PI or abs(grid.ly - TWO_PI) > 1e-12 * TWO_PI:
        raise DomainMismatch("Kolmogorov forcing requires the (0, 2pi)^2 domain")
    if m >= grid.ny // 2:
        raise ValueError(f"forcing wavenumber m={m} not resolvable on ny={grid.ny}")
    c = np.zeros((grid.nx, grid.ny), dtype=complex)
    amp = m**4 / re
    c[0, m] = -0.5j * amp
    c[0, -m] = +0.5j * amp
    return sp.SpectralField2D(grid, c)


def kolmogorov_velocity_forcing(grid, m, re):
    """The primitive-form forcing ((m^3/Re) cos(m y), 0), built exactly."""
    if abs(grid.lx - TWO_PI) > 1e-12 * TWO_PI or abs(grid.ly - TWO_PI) > 1e-12 * TWO_PI:
        raise DomainMismatch("Kolmogorov forcing requires the (0, 2pi)^2 domain")
    c1 = np.zeros((grid.nx, grid.ny), dtype=complex)
    amp = m**3 / re
    c1[0, m] = 0.5 * amp
    c1[0, -m] = 0.5 * amp
    return sp.SpectralField2D(grid, c1), sp.zero_field(grid)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact (omega, psi) pair with compensating sources.

    s_omega closes the transport equation
        d_t omega - (1/re) Lap omega + u.grad omega = s_omega,
    s_p closes the constraint as -Lap psi = omega - s_p
    (the pair does not satisfy omega = -Lap psi on its own).
    Evaluators take (t, x, y) with broadcastable x, y.
    """

    omega: Callable
    psi: Callable
    s_omega: Callable
    s_p: Callable
    lx: float
    ly: float
    re: float
    gamma: float


def manufactured_case_table3():
    """The 32-mode accuracy benchmark on the unit square, Re=10, gamma=1000.

    omega = sin(t) sin(2 pi x) sin(2 pi y), psi = cos(t) cos(2 pi x) cos(2 pi y).
    The advection source term below is the closed-form expansion of
    psi_y*omega_x - psi_x*omega_y; its integral against omega vanishes by
    parity, so the scalar equation needs no extra source.
    """
    re = 10.0
    w = TWO_PI

    def omega(t, x, y):
        return np.sin(t) * np.sin(w * x) * np.sin(w * y)

    def psi(t, x, y):
        return np.cos(t) * np.cos(w * x) * np.cos(w * y)

    def advection(t, x, y):
        sc = np.sin(t) * np.cos(t)
        return w**2 * sc * (np.sin(w * x) ** 2 * np.cos(w * y) ** 2 - np.cos(w * x) ** 2 * np.sin(w * y) ** 2)

    def s_omega(t, x, y):
        lap = -2.0 * w**2 * omega(t, x, y)
        return np.cos(t) * np.sin(w * x) * np.sin(w * y) - lap / re + advection(t, x, y)

    def s_p(t, x, y):
        return omega(t, x, y) - 2.0 * w**2 * psi(t, x, y)

    return ManufacturedCase(omega, psi, s_omega, s_p, lx=1.0, ly=1.0, re=re, gamma=1000.0)


def velocity_from_streamfunction(psi):
    """u = (psi_y, -psi_x); discretely divergence-free."""
    u1 = sp.deriv(psi, "y")
    u2 = sp.SpectralField2D(psi.grid, -sp.deriv(psi, "x").coeffs)
    return u1, u2


def curl(u):
    """Scalar curl d_x u2 - d_y u1 of a velocity pair."""
    u1, u2 = u
    return sp.SpectralField2D(u1.grid, sp.deriv(u2, "x").coeffs - sp.deriv(u1, "y").coeffs)


def divergence(u):
    u1, u2 = u
    return sp.SpectralField2D(u1.grid, sp.deriv(u1, "x").coeffs + sp.deriv(u2, "y").coeffs)


def advection_primitive(u, v, dealias=False):
    """(u.grad)v for velocity pairs, componentwise pseudo-spectral products."""
    u1, u2 = u
    v1, v2 = v
    if not u1.grid.same_as(v1.grid):
        raise GridMismatch(f"{u1.grid!r} vs {v1.grid!r}")
    if dealias:
        u1, u2 = sp.dealias_23(u1), sp.dealias_23(u2)
        v1, v2 = sp.dealias_23(v1), sp.dealias_23(v2)
    g = u1.grid
    dx = (1j * g.kxd)[:, None]
    dy = (1j * g.kyd)[None, :]
    batch = np.empty((6, g.nx, g.ny), dtype=complex)
    batch[0] = u1.coeffs
    batch[1] = u2.coeffs
    np.multiply(dx, v1.coeffs, out=batch[2])
    np.multiply(dy, v1.coeffs, out=batch[3])
    np.multiply(dx, v2.coeffs, out=batch[4])
    np.multiply(dy, v2.coeffs, out=batch[5])
    u1p, u2p, v1x, v1y, v2x, v2y = _fft.ifft2(batch, norm="forward", axes=(-2, -1), workers=_WORKERS).real
    prod = np.empty((2, g.nx, g.ny))
    np.multiply(u1p, v1x, out=prod[0])
    prod[0] += u2p * v1y
    np.multiply(u1p, v2x, out=prod[1])
    prod[1] += u2p * v2y
    out = _fft.fft2(prod, norm="forward", axes=(-2, -1), workers=_WORKERS)
    a1 = sp.SpectralField2D(g, out[0])
    a2 = sp.SpectralField2D(g, out[1])
    if dealias:
        a1, a2 = sp.dealias_23(a1), sp.dealias_23(a2)
    return a1, a2


def leray_project(f):
    """Remove the gradient part per mode: f_hat -= xi (xi . f_hat)/|xi|^2.

    Uses the derivative wavenumbers (Nyquist zeroed) so Hermitian symmetry is
    preserved; modes with no resolvable gradient direction (the mean and the
    pure-Nyquist corners) pass through untouched.
    """
    f1, f2 = f
    g = f1.grid
    kx = g.kxd[:, None]
    ky = g.kyd[None, :]
    k2 = kx**2 + ky**2
    with np.errstate(invalid="ignore"):
        proj = np.where(k2 > 0.0, (kx * f1.coeffs + ky * f2.coeffs) / np.where(k2 > 0.0, k2, 1.0), 0.0)
    return (
        sp.SpectralField2D(g, f1.coeffs - kx * proj),
        sp.SpectralField2D(g, f2.coeffs - ky * proj),
    )


def trilinear(nl, v):
    """<nl, v> with the collocation quadrature of spectral.inner.

    Kept as a named operation: the scalar equation and the momentum equation
    must consume the same quadrature value for the discrete energy flux to
    cancel.
    """
    return sp.inner(nl, v)


def pair_inner(a, b):
    """Vector L2 inner product of two velocity pairs."""
    return sp.inner(a[0], b[0]) + sp.inner(a[1], b[1])
