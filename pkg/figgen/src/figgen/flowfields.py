"""Velocity reconstruction from snapshot vorticity.

Implements the documented spectral relations of the solver output format:
mean-normalized FFT layout, psi_hat = omega_hat / |xi|^2 with a zero-mean
gauge, u = (d_y psi, -d_x psi) with Nyquist derivatives zeroed.
"""

import numpy as np


def wavenumbers(n, length):
    s = np.fft.fftfreq(n, d=1.0 / n)
    k = 2.0 * np.pi * s / length
    kd = k.copy()
    kd[n // 2] = 0.0
    return k, kd


def velocity_from_vorticity(omega, lx, ly):
    """(u1, u2) physical arrays from a physical vorticity array (nx, ny)."""
    nx, ny = omega.shape
    kx, kxd = wavenumbers(nx, lx)
    ky, kyd = wavenumbers(ny, ly)
    what = np.fft.fft2(omega, norm="forward")
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    k2[0, 0] = 1.0
    psi_hat = what / k2
    psi_hat[0, 0] = 0.0
    u1 = np.fft.ifft2((1j * kyd)[None, :] * psi_hat, norm="forward").real
    u2 = np.fft.ifft2(-(1j * kxd)[:, None] * psi_hat, norm="forward").real
    return u1, u2
