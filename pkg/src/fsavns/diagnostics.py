"""Energy bookkeeping, mode tracking, burst detection and spectral statistics.

The quadratic-form helpers here implement the discrete energy of the BDF2
scheme. The two-level form

    gnorm_pair(a, b) = 1/4 ||a||^2 - <a, b> + 5/4 ||b||^2

is positive definite (eigenvalues (1.5 -+ sqrt 2)/2 of the underlying 2x2
matrix). With the heavier weight on the *newer* level, i.e. E^{n} computed
as gnorm_pair(u^{n-1}, u^n), the BDF2 difference telescopes:

    k <delta_t u^{n+1}, u^{n+1}> = E^{n+1} - E^n + 1/4 ||u^{n+1}-2u^n+u^{n-1}||^2.

Inner products of spectral fields are accumulated in coefficient space
(Parseval), which agrees with the collocation quadrature to round-off.
"""

from dataclasses import dataclass
from numbers import Number

import numpy as np

from . import spectral as sp
from .errors import InsufficientData, ModeOutOfRange, NonUniformSampling

GNORM_LAMBDA_MIN = (1.5 - np.sqrt(2.0)) / 2.0
GNORM_LAMBDA_MAX = (1.5 + np.sqrt(2.0)) / 2.0


@dataclass
class TimeSeriesRecord:
    """One diagnostics row; energy_residual is the max per-step residual
    since the previous record."""

    t: float
    l2_omega: float
    h1_omega: float
    max_omega: float
    q: float
    e_gnorm: float
    energy_residual: float
    mode_re: float
    mode_im: float


@dataclass
class BurstEvent:
    t_start: float
    t_peak: float
    t_end: float
    peak_value: float


def _pair_inner(a, b):
    if isinstance(a, Number):
        return float(a) * float(b)
    if isinstance(a, sp.SpectralField2D):
        return sp.coeff_inner(a, b)
    if isinstance(a, tuple):  # velocity pair
        return sp.coeff_inner(a[0], b[0]) + sp.coeff_inner(a[1], b[1])
    raise TypeError(f"unsupported operand {type(a)!r}")


def gnorm_pair(a_new, a_old):
    """Quadratic form 1/4||a_new||^2 - <a_new,a_old> + 5/4||a_old||^2."""
    return 0.25 * _pair_inner(a_new, a_new) - _pair_inner(a_new, a_old) + 1.25 * _pair_inner(a_old, a_old)


def poincare_constant(grid):
    """Smallest eigenvalue of -Lap on the mean-zero periodic space."""
    return (2.0 * np.pi / max(grid.lx, grid.ly)) ** 2


def stability_beta(cfg):
    """Largest admissible energy weight: min(c0/(8 Re), gamma/4)."""
    return min(poincare_constant(cfg.grid) / (8.0 * cfg.re), cfg.gamma / 4.0)


def discrete_energy(state, cfg, beta):
    """Two-level energy  ||V^n||_G^2 + |Q^n|_G^2 + beta*k*(||u^n||^2 + |q^n|^2)."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    e = gnorm_pair(state.w_nm1, state.w_n) + gnorm_pair(state.q_nm1, state.q_n)
    return e + beta * cfg.k * (_pair_inner(state.w_n, state.w_n) + state.q_n**2)


def bdf2_identity_residual(
    dgw, d2w_sq, diss, dgq, d2q_sq, kgq2, forcing_work_k, kgq
):
    """Normalized defect of the per-step energy identity.

    Arguments are the already-evaluated terms: G-norm differences for the
    field and the scalar, the squared second differences (with their 1/4
    weight applied here), the dissipation k<Au,u>, the damping k*gamma*q^2,
    and the right-hand side k<F,u> + k*gamma*q.
    """
    lhs_terms = (dgw, 0.25 * d2w_sq, diss, dgq, 0.25 * d2q_sq, kgq2)
    rhs_terms = (forcing_work_k, kgq)
    scale = sum(abs(v) for v in lhs_terms) + sum(abs(v) for v in rhs_terms)
    if scale == 0.0:
        return 0.0
    return abs(sum(lhs_terms) - sum(rhs_terms)) / scale


def _dirichlet(u):
    if isinstance(u, sp.SpectralField2D):
        return sp.dirichlet_form(u)
    return sp.dirichlet_form(u[0]) + sp.dirichlet_form(u[1])


def _lincomb(a, b, c, ca, cb, cc):
    if isinstance(a, sp.SpectralField2D):
        return sp.SpectralField2D(a.grid, ca * a.coeffs + cb * b.coeffs + cc * c.coeffs)
    return tuple(
        sp.SpectralField2D(ai.grid, ca * ai.coeffs + cb * bi.coeffs + cc * ci.coeffs)
        for ai, bi, ci in zip(a, b, c)
    )


def energy_identity(prev_state, new_state, cfg, forcing_work):
    """Per-step residual of the discrete energy identity for a BDF2 step.

    prev_state holds (u^n, u^{n-1}), new_state (u^{n+1}, u^n); forcing_work
    is <F^{n+1}, u^{n+1}> as consumed by the step. The dissipation term uses
    the full spectral Laplacian, matching the Helmholtz solve exactly.
    """
    k, gamma = cfg.k, cfg.gamma
    w_np1, w_n, w_nm1 = new_state.w_n, prev_state.w_n, prev_state.w_nm1
    q_np1, q_n, q_nm1 = new_state.q_n, prev_state.q_n, prev_state.q_nm1
    dgw = gnorm_pair(w_n, w_np1) - gnorm_pair(w_nm1, w_n)
    d2w = _lincomb(w_np1, w_n, w_nm1, 1.0, -2.0, 1.0)
    dgq = gnorm_pair(q_n, q_np1) - gnorm_pair(q_nm1, q_n)
    return bdf2_identity_residual(
        dgw=dgw,
        d2w_sq=_pair_inner(d2w, d2w),
        diss=(k / cfg.re) * _dirichlet(w_np1),
        dgq=dgq,
        d2q_sq=(q_np1 - 2.0 * q_n + q_nm1) ** 2,
        kgq2=k * gamma * q_np1**2,
        forcing_work_k=k * forcing_work,
        kgq=k * gamma * q_np1,
    )


def track_mode(field, jx, jy):
    """(re, im) of the coefficient of exp(i(jx*2pi*x/lx + jy*2pi*y/ly))."""
    g = field.grid
    if abs(jx) >= g.nx // 2 or abs(jy) >= g.ny // 2:
        raise ModeOutOfRange(f"mode ({jx},{jy}) outside the band of {g!r}")
    c = field.coeffs[jx % g.nx, jy % g.ny]
    return float(c.real), float(c.imag)


def detect_bursts(series, warmup, open_sigma=4.0, close_sigma=2.0, merge_gap=10.0):
    """Threshold burst detector with hysteresis.

    Baseline mean/std are taken over the warmup window [t0, t0+warmup]; a
    burst opens when the value exceeds mean + open_sigma*std, peaks at its
    maximum, and closes below mean + close_sigma*std. An excursion still open
    at the end of the series is not an event (a drift to a higher level is
    not a burst). Events closer than merge_gap time units are merged.
    Invariant under affine rescaling of the values (a tiny std floor relative
    to the series range keeps thresholds meaningful for noise-free baselines).
    """
    t = np.asarray([p[0] for p in series], dtype=float)
    v = np.asarray([p[1] for p in series], dtype=float)
    if t.size == 0:
        return []
    if warmup >= t[-1] - t[0]:
        raise InsufficientData(f"warmup {warmup:g} covers the whole series")
    base = v[t <= t[0] + warmup]
    mu = float(np.mean(base))
    sigma = float(np.std(base))
    sigma = max(sigma, 1e-9 * float(np.ptp(v)))
    hi = mu + open_sigma * sigma
    lo = mu + close_sigma * sigma

    events = []
    in_burst = False
    start = peak_t = peak_v = None
    scan = np.nonzero(t > t[0] + warmup)[0]
    for i in scan:
        if not in_burst:
            if v[i] > hi:
                in_burst = True
                start = t[i - 1] if i > 0 else t[i]
                peak_t, peak_v = t[i], v[i]
        else:
            if v[i] > peak_v:
                peak_t, peak_v = t[i], v[i]
            if v[i] < lo:
                events.append(BurstEvent(start, peak_t, t[i], peak_v))
                in_burst = False

    merged = []
    for ev in events:
        if merged and ev.t_start - merged[-1].t_end < merge_gap:
            prev = merged[-1]
            keep = prev if prev.peak_value >= ev.peak_value else ev
            merged[-1] = BurstEvent(prev.t_start, keep.t_peak, ev.t_end, keep.peak_value)
        else:
            merged.append(ev)
    return merged


def psd(series, segments=1):
    """One-sided mean-removed periodogram: power = |DFT(v - mean)|^2 * dt / Ns.

    Interior bins are doubled so the total power equals variance * duration
    (Parseval). With segments > 1 the series is split into equal
    non-overlapping chunks (per-chunk mean removed) and the periodograms are
    averaged.
    """
    t = np.asarray([p[0] for p in series], dtype=float)
    v = np.asarray([p[1] for p in series], dtype=float)
    if t.size < 2:
        raise InsufficientData("need at least two samples")
    dts = np.diff(t)
    dt = dts[0]
    if np.max(np.abs(dts - dt)) > 1e-9 * max(abs(dt), 1e-30):
        raise NonUniformSampling("time series is not uniformly sampled")
    if segments < 1 or t.size // segments < 2:
        raise ValueError("invalid segment count")

    ns = t.size // segments
    acc = None
    for s in range(segments):
        chunk = v[s * ns : (s + 1) * ns]
        x = np.fft.rfft(chunk - np.mean(chunk))
        p = (np.abs(x) ** 2) * dt / ns
        p[1:] *= 2.0
        if ns % 2 == 0:
            p[-1] /= 2.0  # Nyquist bin is not mirrored
        acc = p if acc is None else acc + p
    power = acc / segments
    freq = np.fft.rfftfreq(ns, d=dt)
    return list(zip(freq.tolist(), power.tolist()))


def make_record(state, cfg, tracked_mode=(0, 1), energy_residual=0.0, beta=None):
    """Assemble a TimeSeriesRecord from a solver state (vorticity form)."""
    from . import model

    w = state.w_n
    if isinstance(w, tuple):
        w = model.curl(w)
    l2, h1, linf = sp.norms(w)
    mode_re, mode_im = track_mode(w, *tracked_mode)
    if beta is None:
        beta = stability_beta(cfg)
    return TimeSeriesRecord(
        t=state.t,
        l2_omega=l2,
        h1_omega=h1,
        max_omega=linf,
        q=state.q_n,
        e_gnorm=discrete_energy(state, cfg, beta),
        energy_residual=energy_residual,
        mode_re=mode_re,
        mode_im=mode_im,
    )
