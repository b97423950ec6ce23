"""FSAV-BDF2 over an abstract forced dissipative system
du/dt + A u + N(u, u) = F(t), with A symmetric positive and N energy-neutral
(<N(u,u), u> = 0).

The step is the same two-solve superposition as the concrete stepper; the
dissipative solve must be exact (closed form or per-mode), since an iterative
tolerance would contaminate the energy-identity budget. States are any
objects supporting numpy-style arithmetic (+, -, * by scalars).
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .diagnostics import bdf2_identity_residual, gnorm_pair
from .errors import BlowUp, DenominatorNonpositive, InternalInvariantViolation
from .stepper import StepReport


class DissipativeSystem(ABC):
    """Operations a concrete system must provide."""

    @abstractmethod
    def apply_A(self, u):
        """Symmetric positive linear operator."""

    @abstractmethod
    def apply_N(self, u, v):
        """Bilinear term with <N(u,u), u> = 0."""

    @abstractmethod
    def forcing(self, t):
        ...

    @abstractmethod
    def inner(self, u, v):
        ...

    @abstractmethod
    def solve_shifted(self, sigma, rhs):
        """Exact solve of (sigma I + A) w = rhs for sigma > 0."""

    @abstractmethod
    def sample_state(self, rng):
        """Random state for property checks."""


@dataclass
class AbstractState:
    u_n: object
    u_nm1: object
    q_n: float
    q_nm1: float
    t: float
    step: int


def initial_abstract_state(u0, q0=1.0):
    return AbstractState(u0, None, q0, np.nan, 0.0, 0)


def _finite(u):
    return bool(np.all(np.isfinite(np.asarray(u))))


def abstract_step(state, system, k, gamma):
    """One FSAV step: BDF1 from a single level, BDF2 otherwise.

    Returns (state, report); the report carries the per-step energy-identity
    residual (BDF2 steps only, else nan).
    """
    t_np1 = (state.step + 1) * k
    f = system.forcing(t_np1)
    first = state.u_nm1 is None
    if first:
        sigma = 1.0 / k
        ubar = state.u_n
        rhs1 = f + state.u_n / k
        dq = state.q_n / k
    else:
        sigma = 3.0 / (2.0 * k)
        ubar = 2.0 * state.u_n - state.u_nm1
        rhs1 = f + (4.0 * state.u_n - state.u_nm1) / (2.0 * k)
        dq = (4.0 * state.q_n - state.q_nm1) / (2.0 * k)

    nbar = system.apply_N(ubar, ubar)
    u1 = system.solve_shifted(sigma, rhs1)
    u2 = system.solve_shifted(sigma, -nbar)
    b1 = system.inner(nbar, u1)
    b2 = system.inner(nbar, u2)
    base = sigma + gamma
    denom = base - b2
    if denom <= 0.0:
        raise DenominatorNonpositive(f"q denominator {denom:g} <= 0")
    if denom < base - 1e-12 * max(1.0, abs(b2), base):
        raise InternalInvariantViolation(f"q denominator {denom!r} below {base!r}")
    q_np1 = (gamma + dq + b1) / denom
    u_np1 = u1 + q_np1 * u2
    if not (_finite(u_np1) and np.isfinite(q_np1)):
        raise BlowUp(t_np1, state.step + 1)

    if first:
        resid = float("nan")
    else:
        d2u = u_np1 - 2.0 * state.u_n + state.u_nm1
        dgu = _gn(system, state.u_n, u_np1) - _gn(system, state.u_nm1, state.u_n)
        dgq = gnorm_pair(state.q_n, q_np1) - gnorm_pair(state.q_nm1, state.q_n)
        resid = bdf2_identity_residual(
            dgw=dgu,
            d2w_sq=system.inner(d2u, d2u),
            diss=k * system.inner(system.apply_A(u_np1), u_np1),
            dgq=dgq,
            d2q_sq=(q_np1 - 2.0 * state.q_n + state.q_nm1) ** 2,
            kgq2=k * gamma * q_np1**2,
            forcing_work_k=k * system.inner(f, u_np1),
            kgq=k * gamma * q_np1,
        )
    new = AbstractState(u_np1, state.u_n, q_np1, state.q_n, t_np1, state.step + 1)
    return new, StepReport(q_np1, denom, resid, b1, b2)


def _gn(system, older, newer):
    return (
        0.25 * system.inner(older, older)
        - system.inner(older, newer)
        + 1.25 * system.inner(newer, newer)
    )


@dataclass
class SystemReport:
    max_symmetry_defect: float
    min_positivity: float
    max_energy_flux: float


def verify_system(system, trials, seed=0):
    """Random-vector checks of A symmetry/positivity and N energy neutrality.

    Defects are normalized by the magnitudes of the quantities involved.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    sym = 0.0
    pos = np.inf
    flux = 0.0
    for _ in range(trials):
        u = system.sample_state(rng)
        v = system.sample_state(rng)
        au, av = system.apply_A(u), system.apply_A(v)
        scale = max(abs(system.inner(au, v)), abs(system.inner(u, av)), 1e-300)
        sym = max(sym, abs(system.inner(au, v) - system.inner(u, av)) / scale)
        pos = min(pos, system.inner(au, u) / max(system.inner(u, u), 1e-300))
        n = system.apply_N(u, u)
        nscale = max(
            np.sqrt(max(system.inner(n, n), 0.0)) * np.sqrt(max(system.inner(u, u), 0.0)),
            1e-300,
        )
        flux = max(flux, abs(system.inner(n, u)) / nscale)
    return SystemReport(sym, pos, flux)


class ToyTriad(DissipativeSystem):
    """Three-mode system: A = diag(nu), N(u,v) = (c1 u2 v3, c2 u3 v1, c3 u1 v2)
    with c1 + c2 + c3 = 0, so the nonlinear energy flux vanishes exactly."""

    def __init__(self, nu=(1.0, 1.0, 1.0), c=(1.0, 1.0, -2.0), f=(1.0, 0.0, 0.0)):
        if abs(sum(c)) > 1e-14 * max(abs(x) for x in c):
            raise ValueError("triad coefficients must sum to zero")
        if min(nu) <= 0:
            raise ValueError("dissipation rates must be positive")
        self.nu = np.asarray(nu, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.f = np.asarray(f, dtype=float)

    def apply_A(self, u):
        return self.nu * u

    def apply_N(self, u, v):
        c = self.c
        return np.array([c[0] * u[1] * v[2], c[1] * u[2] * v[0], c[2] * u[0] * v[1]])

    def forcing(self, t):
        return self.f

    def inner(self, u, v):
        return float(np.dot(u, v))

    def solve_shifted(self, sigma, rhs):
        return rhs / (sigma + self.nu)

    def sample_state(self, rng):
        return rng.standard_normal(3)


class StreamfunctionNSE(DissipativeSystem):
    """The vorticity-form solver wrapped as an abstract system over raw
    coefficient arrays (A = -(1/Re) Lap on the mean-zero space)."""

    def __init__(self, cfg):
        from . import model, stepper

        self._model = model
        self.cfg = cfg
        self.grid = cfg.grid
        ops_forcing = {
            "kolmogorov": lambda t: model.kolmogorov_vorticity_forcing(
                self.grid, cfg.forcing.m, cfg.re
            ).coeffs,
            "none": lambda t: np.zeros((self.grid.nx, self.grid.ny), dtype=complex),
        }
        if cfg.forcing.kind not in ops_forcing:
            raise ValueError("wrapper supports kolmogorov or unforced configs")
        self._forcing = ops_forcing[cfg.forcing.kind]

    def apply_A(self, u):
        return (self.grid.k2 / self.cfg.re) * u

    def apply_N(self, u, v):
        import fsavns.spectral as sp

        psi = sp.inv_neg_laplacian(sp.SpectralField2D(self.grid, u))
        return self._model.jacobian(psi, sp.SpectralField2D(self.grid, v), self.cfg.dealias).coeffs

    def forcing(self, t):
        return self._forcing(t)

    def inner(self, u, v):
        import fsavns.spectral as sp

        return sp.inner(
            sp.SpectralField2D(self.grid, u), sp.SpectralField2D(self.grid, v)
        )

    def solve_shifted(self, sigma, rhs):
        return rhs / (sigma + self.grid.k2 / self.cfg.re)

    def sample_state(self, rng):
        # band-limited so the triple product is exactly integrated
        g = self.grid
        band = max((min(g.nx, g.ny) - 1) // 3, 1)
        c = np.zeros((g.nx, g.ny), dtype=complex)
        for jx in range(-band, band + 1):
            for jy in range(-band, band + 1):
                if (jx, jy) == (0, 0) or (jx, jy) > (-jx, -jy):
                    continue
                v = rng.standard_normal() + 1j * rng.standard_normal()
                c[jx % g.nx, jy % g.ny] = v
                c[-jx % g.nx, -jy % g.ny] = np.conj(v)
        return c
