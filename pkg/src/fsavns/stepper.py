"""Time integrators: FSAV-BDF2 (vorticity and primitive forms), the FSAV-BDF1
initializer, and the explicit IMEX-BDF2 baseline.

One FSAV-BDF2 step advances (u^n, u^{n-1}, q^n, q^{n-1}) by solving

    delta_t u + A u + q^{n+1} N(ubar, ubar) = F^{n+1}
    delta_t q + gamma q^{n+1} - <N(ubar, ubar), u^{n+1}> = gamma

with delta_t the BDF2 difference and ubar = 2 u^n - u^{n-1}. Linearity in
q^{n+1} gives the two-solve superposition u^{n+1} = u1 + q^{n+1} u2 where
both solves share the constant Helmholtz (or Brinkman) operator, and the
scalar update closes in one division:

    q^{n+1} = (gamma + (4q^n - q^{n-1})/(2k) + b1) / (3/(2k) + gamma - b2),
    b_i = <N(ubar, ubar), u_i>.

b2 = -<N, H^{-1} N> <= 0 because the inverse operator is SPD, so the
denominator never drops below 3/(2k) + gamma; this margin is asserted on
every step.

States are canonical in physical space: the stored coefficients always equal
the transform of the stored physical arrays, which is what makes a restart
from a (physical-space) checkpoint reproduce the trajectory bitwise.
"""

import functools
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as _fft

from . import diagnostics, model, spectral as sp
from .errors import (
    BlowUp,
    DenominatorNonpositive,
    InternalInvariantViolation,
    DivergenceViolation,
    NonIntegralHorizon,
)

SCHEMES = ("fsav_bdf2_sv", "fsav_bdf2_primitive", "imex_bdf2_sv")
_WORKERS = sp.FFT_WORKERS


@dataclass(frozen=True)
class SchemeConfig:
    k: float
    re: float
    grid: sp.Grid2D
    gamma: float = 1000.0
    scheme: str = "fsav_bdf2_sv"
    dealias: bool = False
    forcing: model.ForcingSpec = model.ForcingSpec("none")
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("time step k must be positive")
        if self.re <= 0:
            raise ValueError("Reynolds number must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme.startswith("fsav") and self.gamma <= 0:
            raise ValueError("gamma must be positive for FSAV schemes")


@dataclass
class StepReport:
    q_new: float
    q_denominator: float
    energy_identity_residual: float
    trilinear_b1: float
    trilinear_b2: float


@dataclass
class SolverState:
    """Two time levels plus the scalar levels; w_* are SpectralField2D for the
    vorticity forms or (u1, u2) pairs for the primitive form. w_nm1 is None
    until the first-order initializer has run."""

    w_n: object
    w_nm1: object
    q_n: float
    q_nm1: float
    t: float
    step: int
    w_n_phys: object = None
    w_nm1_phys: object = None


def _canonical(grid, coeffs):
    """(field, phys) with field.coeffs == fft(phys) exactly."""
    phys = _fft.ifft2(coeffs, norm="forward", workers=_WORKERS).real
    return sp.SpectralField2D(grid, _fft.fft2(phys, norm="forward", workers=_WORKERS)), phys


def _canonical_pair(grid, c1, c2):
    batch = np.empty((2, grid.nx, grid.ny), dtype=complex)
    batch[0], batch[1] = c1, c2
    phys = _fft.ifft2(batch, norm="forward", axes=(-2, -1), workers=_WORKERS).real
    spec = _fft.fft2(phys, norm="forward", axes=(-2, -1), workers=_WORKERS)
    pair = (sp.SpectralField2D(grid, spec[0]), sp.SpectralField2D(grid, spec[1]))
    return pair, (phys[0], phys[1])


def initial_state(field, q0=1.0):
    """Single-level state from a vorticity field (or velocity pair)."""
    if isinstance(field, tuple):
        pair, phys = _canonical_pair(field[0].grid, field[0].coeffs, field[1].coeffs)
        return SolverState(pair, None, q0, np.nan, 0.0, 0, phys, None)
    f, phys = _canonical(field.grid, field.coeffs)
    return SolverState(f, None, q0, np.nan, 0.0, 0, phys, None)


def _check_alive(phys_arrays, cfg, t, step):
    m = 0.0
    for a in phys_arrays:
        if not np.all(np.isfinite(a)):
            raise BlowUp(t, step)
        m = max(m, float(np.max(np.abs(a))))
    if m > cfg.blowup_threshold:
        raise BlowUp(t, step)


class _Operators:
    """Per-config caches: Helmholtz symbols, forcing and source evaluators."""

    def __init__(self, cfg):
        g = cfg.grid
        self.cfg = cfg
        self.mult2 = 1.5 / cfg.k + g.k2 / cfg.re
        self.mult1 = 1.0 / cfg.k + g.k2 / cfg.re
        kind = cfg.forcing.kind
        self.case = None
        if kind == "kolmogorov":
            if abs(cfg.forcing.re - cfg.re) > 1e-12 * cfg.re:
                raise ValueError("forcing.re disagrees with cfg.re")
            self._f_sv = model.kolmogorov_vorticity_forcing(g, cfg.forcing.m, cfg.re)
            self._f_prim = model.kolmogorov_velocity_forcing(g, cfg.forcing.m, cfg.re)
        elif kind == "none":
            self._f_sv = sp.zero_field(g)
            self._f_prim = (sp.zero_field(g), sp.zero_field(g))
        elif kind == "manufactured":
            case = model.manufactured_case_table3()
            if abs(g.lx - case.lx) > 1e-12 or abs(g.ly - case.ly) > 1e-12:
                raise ValueError("manufactured case requires the unit square")
            if abs(cfg.re - case.re) > 1e-12:
                raise ValueError(f"manufactured case is defined for re={case.re:g}")
            self.case = case
            self._f_sv = None
            self._f_prim = None
        self._sp_cache = {}

    def forcing_sv(self, t):
        if self.case is None:
            return self._f_sv
        g = self.cfg.grid
        return sp.field_from_function(g, lambda x, y: self.case.s_omega(t, x, y))

    def forcing_prim(self, t):
        if self._f_prim is None:
            raise ValueError("manufactured forcing is not supported in the primitive form")
        return self._f_prim

    def s_p_hat(self, t):
        """Constraint-source coefficients at time t (None when not manufactured)."""
        if self.case is None:
            return None
        if t not in self._sp_cache:
            if len(self._sp_cache) > 4:
                self._sp_cache.clear()
            g = self.cfg.grid
            self._sp_cache[t] = sp.field_from_function(g, lambda x, y: self.case.s_p(t, x, y)).coeffs
        return self._sp_cache[t]


@functools.lru_cache(maxsize=16)
def _operators(cfg):
    return _Operators(cfg)


def helmholtz_solve(rhs, k, re):
    """Exact per-mode solve of (3/(2k) - (1/Re) Lap) w = rhs."""
    g = rhs.grid
    return sp.SpectralField2D(g, rhs.coeffs / (1.5 / k + g.k2 / re))


def streamfunction_at(state_field, cfg, t):
    """psi from vorticity, honoring the manufactured constraint source."""
    ops = _operators(cfg)
    sph = ops.s_p_hat(t)
    c = state_field.coeffs if sph is None else state_field.coeffs - sph
    return sp.inv_neg_laplacian(sp.SpectralField2D(cfg.grid, c))


def _phys_batch(arrays):
    batch = np.empty((len(arrays),) + arrays[0].shape, dtype=complex)
    for i, a in enumerate(arrays):
        batch[i] = a
    return _fft.ifft2(batch, norm="forward", axes=(-2, -1), workers=_WORKERS).real


def _q_denominator_check(denom, base, b2):
    if denom <= 0.0:
        raise DenominatorNonpositive(f"q denominator {denom:g} <= 0")
    if denom < base - 1e-12 * max(1.0, abs(b2), base):
        raise InternalInvariantViolation(
            f"q denominator {denom!r} below 3/(2k)+gamma = {base!r}"
        )


def step_fsav_bdf2_sv(state, cfg):
    """One FSAV-BDF2 step of the vorticity form; returns (state, report)."""
    ops = _operators(cfg)
    g = cfg.grid
    k, re, gamma = cfg.k, cfg.re, cfg.gamma
    cw = g.cell_weight
    cn, cnm1 = state.w_n.coeffs, state.w_nm1.coeffs
    t_np1 = (state.step + 1) * k

    wbar = 2.0 * cn - cnm1
    if ops.case is not None:
        tn, tnm1 = state.step * k, (state.step - 1) * k
        wbar = wbar - (2.0 * ops.s_p_hat(tn) - ops.s_p_hat(tnm1))
    psibar = sp.inv_neg_laplacian(sp.SpectralField2D(g, wbar))
    nbar = model.jacobian(psibar, sp.SpectralField2D(g, 2.0 * cn - cnm1), cfg.dealias)

    f_hat = ops.forcing_sv(t_np1).coeffs
    w1 = 4.0 * cn
    w1 -= cnm1
    w1 /= 2.0 * k
    w1 += f_hat
    w1 /= ops.mult2
    w2 = nbar.coeffs / ops.mult2
    np.negative(w2, out=w2)

    nb_p, w1_p, w2_p = _phys_batch([nbar.coeffs, w1, w2])
    b1 = cw * float(np.sum(nb_p * w1_p))
    b2 = cw * float(np.sum(nb_p * w2_p))
    base = 3.0 / (2.0 * k) + gamma
    denom = base - b2
    _q_denominator_check(denom, base, b2)
    q_np1 = (gamma + (4.0 * state.q_n - state.q_nm1) / (2.0 * k) + b1) / denom

    field, phys = _canonical(g, w1 + q_np1 * w2)
    _check_alive([phys], cfg, t_np1, state.step + 1)
    new = SolverState(
        field, state.w_n, q_np1, state.q_n, t_np1, state.step + 1, phys, state.w_n_phys
    )
    fwork = sp.coeff_inner(sp.SpectralField2D(g, f_hat), field)
    resid = diagnostics.energy_identity(state, new, cfg, fwork)
    return new, StepReport(q_np1, denom, resid, b1, b2)


def step_fsav_bdf1(state, cfg):
    """First-order FSAV initializer from a single level (q^0 = 1)."""
    ops = _operators(cfg)
    g = cfg.grid
    k, re, gamma = cfg.k, cfg.re, cfg.gamma
    cw = g.cell_weight
    c0 = state.w_n.coeffs
    t0, t1 = state.step * k, (state.step + 1) * k

    psi0 = streamfunction_at(state.w_n, cfg, t0)
    n0 = model.jacobian(psi0, state.w_n, cfg.dealias)
    f_hat = ops.forcing_sv(t1).coeffs
    w1 = (f_hat + c0 / k) / ops.mult1
    w2 = -n0.coeffs / ops.mult1

    n0_p, w1_p, w2_p = _phys_batch([n0.coeffs, w1, w2])
    b1 = cw * float(np.sum(n0_p * w1_p))
    b2 = cw * float(np.sum(n0_p * w2_p))
    base = 1.0 / k + gamma
    denom = base - b2
    _q_denominator_check(denom, base, b2)
    q1 = (gamma + state.q_n / k + b1) / denom

    field, phys = _canonical(g, w1 + q1 * w2)
    _check_alive([phys], cfg, t1, state.step + 1)
    return SolverState(field, state.w_n, q1, state.q_n, t1, state.step + 1, phys, state.w_n_phys)


def step_imex_bdf2_sv(state, cfg):
    """BDF2 with fully explicit advection and no scalar stabilization."""
    ops = _operators(cfg)
    g = cfg.grid
    k = cfg.k
    cn, cnm1 = state.w_n.coeffs, state.w_nm1.coeffs
    t_np1 = (state.step + 1) * k

    wbar = sp.SpectralField2D(g, 2.0 * cn - cnm1)
    psibar = sp.inv_neg_laplacian(wbar)
    nbar = model.jacobian(psibar, wbar, cfg.dealias)
    f_hat = ops.forcing_sv(t_np1).coeffs
    c = 4.0 * cn
    c -= cnm1
    c /= 2.0 * k
    c += f_hat
    c -= nbar.coeffs
    c /= ops.mult2

    field, phys = _canonical(g, c)
    _check_alive([phys], cfg, t_np1, state.step + 1)
    return SolverState(field, state.w_n, 1.0, 1.0, t_np1, state.step + 1, phys, state.w_n_phys)


def _step_imex_bdf1(state, cfg):
    ops = _operators(cfg)
    g = cfg.grid
    k = cfg.k
    c0 = state.w_n.coeffs
    psi0 = sp.inv_neg_laplacian(state.w_n)
    n0 = model.jacobian(psi0, state.w_n, cfg.dealias)
    c = (ops.forcing_sv(k).coeffs + c0 / k - n0.coeffs) / ops.mult1
    field, phys = _canonical(g, c)
    _check_alive([phys], cfg, k, state.step + 1)
    return SolverState(field, state.w_n, 1.0, 1.0, k, state.step + 1, phys, state.w_n_phys)


def _brinkman(pair_coeffs, mult, g):
    p1, p2 = model.leray_project(
        (sp.SpectralField2D(g, pair_coeffs[0]), sp.SpectralField2D(g, pair_coeffs[1]))
    )
    return p1.coeffs / mult, p2.coeffs / mult


def _check_divergence_free(pair, g):
    div = sp.deriv(pair[0], "x").coeffs + sp.deriv(pair[1], "y").coeffs
    scale = max(np.max(np.abs(pair[0].coeffs)), np.max(np.abs(pair[1].coeffs)), 1e-300)
    kmax = max(np.max(np.abs(g.kxd)), np.max(np.abs(g.kyd)))
    if np.max(np.abs(div)) > 1e-12 * scale * kmax:
        raise DivergenceViolation(f"divergence defect {np.max(np.abs(div)):.3e}")


def step_fsav_bdf2_primitive(state, cfg):
    """FSAV-BDF2 for the periodic primitive form via Leray-projected solves."""
    ops = _operators(cfg)
    g = cfg.grid
    k, gamma = cfg.k, cfg.gamma
    cw = g.cell_weight
    un, unm1 = state.w_n, state.w_nm1
    t_np1 = (state.step + 1) * k

    ubar = tuple(
        sp.SpectralField2D(g, 2.0 * a.coeffs - b.coeffs) for a, b in zip(un, unm1)
    )
    g1, g2 = model.advection_primitive(ubar, ubar, cfg.dealias)
    f1, f2 = ops.forcing_prim(t_np1)
    rhs1 = (
        f1.coeffs + (4.0 * un[0].coeffs - unm1[0].coeffs) / (2.0 * k),
        f2.coeffs + (4.0 * un[1].coeffs - unm1[1].coeffs) / (2.0 * k),
    )
    u1s = _brinkman(rhs1, ops.mult2, g)
    u2s = _brinkman((-g1.coeffs, -g2.coeffs), ops.mult2, g)

    phys = _phys_batch([g1.coeffs, g2.coeffs, u1s[0], u1s[1], u2s[0], u2s[1]])
    b1 = cw * float(np.sum(phys[0] * phys[2]) + np.sum(phys[1] * phys[3]))
    b2 = cw * float(np.sum(phys[0] * phys[4]) + np.sum(phys[1] * phys[5]))
    base = 3.0 / (2.0 * k) + gamma
    denom = base - b2
    _q_denominator_check(denom, base, b2)
    q_np1 = (gamma + (4.0 * state.q_n - state.q_nm1) / (2.0 * k) + b1) / denom

    pair, pphys = _canonical_pair(g, u1s[0] + q_np1 * u2s[0], u1s[1] + q_np1 * u2s[1])
    _check_alive(pphys, cfg, t_np1, state.step + 1)
    _check_divergence_free(pair, g)
    new = SolverState(pair, un, q_np1, state.q_n, t_np1, state.step + 1, pphys, state.w_n_phys)
    fwork = sp.coeff_inner(f1, pair[0]) + sp.coeff_inner(f2, pair[1])
    resid = diagnostics.energy_identity(state, new, cfg, fwork)
    return new, StepReport(q_np1, denom, resid, b1, b2)


def _step_fsav_bdf1_primitive(state, cfg):
    ops = _operators(cfg)
    g = cfg.grid
    k, gamma = cfg.k, cfg.gamma
    cw = g.cell_weight
    u0 = state.w_n
    g1, g2 = model.advection_primitive(u0, u0, cfg.dealias)
    f1, f2 = ops.forcing_prim(k)
    u1s = _brinkman((f1.coeffs + u0[0].coeffs / k, f2.coeffs + u0[1].coeffs / k), ops.mult1, g)
    u2s = _brinkman((-g1.coeffs, -g2.coeffs), ops.mult1, g)
    phys = _phys_batch([g1.coeffs, g2.coeffs, u1s[0], u1s[1], u2s[0], u2s[1]])
    b1 = cw * float(np.sum(phys[0] * phys[2]) + np.sum(phys[1] * phys[3]))
    b2 = cw * float(np.sum(phys[0] * phys[4]) + np.sum(phys[1] * phys[5]))
    base = 1.0 / k + gamma
    denom = base - b2
    _q_denominator_check(denom, base, b2)
    q1 = (gamma + state.q_n / k + b1) / denom
    pair, pphys = _canonical_pair(g, u1s[0] + q1 * u2s[0], u1s[1] + q1 * u2s[1])
    _check_alive(pphys, cfg, k, state.step + 1)
    _check_divergence_free(pair, g)
    return SolverState(pair, u0, q1, state.q_n, k, state.step + 1, pphys, state.w_n_phys)


_INITIALIZERS = {
    "fsav_bdf2_sv": step_fsav_bdf1,
    "imex_bdf2_sv": _step_imex_bdf1,
    "fsav_bdf2_primitive": _step_fsav_bdf1_primitive,
}


def _step_once(state, cfg):
    """Uniform (state, report-or-None) stepping helper."""
    if state.w_nm1 is None:
        return _INITIALIZERS[cfg.scheme](state, cfg), None
    if cfg.scheme == "fsav_bdf2_sv":
        return step_fsav_bdf2_sv(state, cfg)
    if cfg.scheme == "imex_bdf2_sv":
        return step_imex_bdf2_sv(state, cfg), None
    return step_fsav_bdf2_primitive(state, cfg)


def _with_two_levels(state):
    if state.w_nm1 is not None:
        return state
    return replace(state, w_nm1=state.w_n, q_nm1=state.q_n, w_nm1_phys=state.w_n_phys)


def run(
    initial,
    cfg,
    T,
    *,
    sample_every=1,
    on_sample=None,
    on_step=None,
    tracked_mode=(0, 1),
    wall_deadline=None,
):
    """Integrate to t = T (first step via BDF1 when starting from one level).

    T/k must be integral within 1e-9. on_sample(record, state) fires every
    sample_every steps (including the initial state and the final step); the
    record's energy_residual is the max per-step identity residual since the
    previous sample. on_step(state, report) fires after every step. If
    wall_deadline (time.monotonic value) passes, returns the current state
    early; callers detect the short run via state.t < T.
    """
    steps_f = T / cfg.k
    n_steps = round(steps_f)
    if abs(steps_f - n_steps) > 1e-9 * max(1.0, abs(steps_f)) or n_steps < 1:
        raise NonIntegralHorizon(f"T/k = {steps_f!r} is not a positive integer")

    state = initial if isinstance(initial, SolverState) else initial_state(initial)

    def emit(resid):
        if on_sample is not None:
            rec = diagnostics.make_record(
                _with_two_levels(state), cfg, tracked_mode, energy_residual=resid
            )
            on_sample(rec, state)

    # IMEX steps carry no identity; their residual column reads NaN
    resid_floor = float("nan") if cfg.scheme == "imex_bdf2_sv" else 0.0
    if state.step == 0:
        emit(resid_floor)
    resid_max = resid_floor
    while state.step < n_steps:
        state, report = _step_once(state, cfg)
        if report is not None:
            resid_max = max(resid_max, report.energy_identity_residual)
        if on_step is not None:
            on_step(state, report)
        if state.step % sample_every == 0 or state.step == n_steps:
            emit(resid_max)
            resid_max = resid_floor
        if wall_deadline is not None and time.monotonic() > wall_deadline:
            break
    return state
