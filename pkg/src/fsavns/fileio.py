"""Run configuration, CSV time series, and binary checkpoint format.

Config files are plain ``key = value`` lines with ``#`` comments; unknown
keys are rejected. Checkpoints store the two physical-space vorticity levels
(little-endian f64, x varying fastest) so the format is independent of any
transform convention; the solver state is canonical in physical space, which
makes write -> read -> continue reproduce the uninterrupted trajectory
bitwise on the same build.
"""

import struct
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np
from scipy import fft as _fft

from . import model, spectral as sp, stepper
from .errors import ConfigError, CorruptCheckpoint, NonIntegralHorizon, ParseError

_WORKERS = sp.FFT_WORKERS

CSV_HEADER = "t,l2_omega,h1_omega,max_omega,q,e_gnorm,energy_residual,mode_re,mode_im"

_MAGIC = b"FSAV"
_FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<4sIIIdddQddI")
_SCHEME_TAGS = {"fsav_bdf2_sv": 1, "imex_bdf2_sv": 2, "fsav_bdf2_primitive": 3}
_TAG_SCHEMES = {v: k for k, v in _SCHEME_TAGS.items()}

INITIAL_KINDS = ("zero", "basic", "stability", "bursting", "manufactured", "random")


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; scheme_config() strips the run-level extras."""

    nx: int = 64
    ny: int = 64
    lx: float = 2.0 * np.pi
    ly: float = 2.0 * np.pi
    k: float = 0.01
    re: float = 100.0
    gamma: float = 1000.0
    scheme: str = "fsav_bdf2_sv"
    dealias: bool = False
    forcing: str = "kolmogorov"
    m: int = 2
    blowup_threshold: float = 1e8
    T: float = 1.0
    sample_every: int = 1
    checkpoint_every: int = 0
    output_dir: str = "out"
    initial: str = "basic"
    perturb_amplitude: float = 0.001
    burst_perturb_jx: int = 1
    burst_perturb_jy: int = 1
    tracked_jx: int = 0
    tracked_jy: int = 1
    burst_warmup: float = 200.0
    burst_open_sigma: float = 4.0
    burst_close_sigma: float = 2.0
    burst_merge_gap: float = 10.0
    seed: int = 0
    snapshot_times: tuple = field(default_factory=tuple)

    def scheme_config(self):
        return stepper.SchemeConfig(
            k=self.k,
            re=self.re,
            gamma=self.gamma,
            grid=sp.Grid2D(self.nx, self.ny, self.lx, self.ly),
            scheme=self.scheme,
            dealias=self.dealias,
            forcing=model.ForcingSpec(self.forcing, m=self.m, re=self.re),
            blowup_threshold=self.blowup_threshold,
        )


def _parse_bool(text):
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_times(text):
    if not text.strip():
        return ()
    return tuple(float(v) for v in text.split(","))


_PARSERS = {int: int, float: float, str: str, bool: _parse_bool, tuple: _parse_times}


def parse_config(text):
    """Parse a key = value document into a RunConfig (unknown keys rejected)."""
    spec = {f.name: f.type for f in dc_fields(RunConfig)}
    typemap = {"int": int, "float": float, "str": str, "bool": bool, "tuple": tuple}
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in spec:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        ftype = spec[key] if isinstance(spec[key], type) else typemap[spec[key]]
        try:
            values[key] = _PARSERS[ftype](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno) from None
        lines[key] = lineno

    try:
        cfg = RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg, lines)
    return cfg


def _validate(cfg, lines):
    def err(key, msg, cls=ConfigError):
        raise cls(msg, line=lines.get(key))

    if cfg.k <= 0:
        err("k", "time step k must be positive")
    if cfg.re <= 0:
        err("re", "Reynolds number must be positive")
    if cfg.scheme.startswith("fsav") and cfg.gamma <= 0:
        err("gamma", "gamma must be positive for FSAV schemes")
    if cfg.scheme not in stepper.SCHEMES:
        err("scheme", f"unknown scheme {cfg.scheme!r}")
    if cfg.forcing not in ("kolmogorov", "manufactured", "none"):
        err("forcing", f"unknown forcing {cfg.forcing!r}")
    if cfg.initial not in INITIAL_KINDS:
        err("initial", f"unknown initial condition {cfg.initial!r}")
    if cfg.sample_every < 1:
        err("sample_every", "sample_every must be >= 1")
    if cfg.nx < 8 or cfg.ny < 8 or cfg.nx % 2 or cfg.ny % 2:
        err("nx", "grid dims must be even and >= 8")
    if cfg.forcing == "kolmogorov":
        two_pi = 2.0 * np.pi
        if abs(cfg.lx - two_pi) > 1e-12 * two_pi or abs(cfg.ly - two_pi) > 1e-12 * two_pi:
            err("lx", "Kolmogorov forcing requires lx = ly = 2*pi")
    if cfg.forcing == "manufactured":
        case = model.manufactured_case_table3()
        if abs(cfg.lx - case.lx) > 1e-12 or abs(cfg.ly - case.ly) > 1e-12:
            err("lx", "manufactured forcing requires the unit square")
        if abs(cfg.re - case.re) > 1e-12:
            err("re", f"manufactured forcing is defined for re = {case.re:g}")
        if cfg.scheme == "fsav_bdf2_primitive":
            err("scheme", "manufactured runs use the vorticity form")
    steps = cfg.T / cfg.k
    if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)) or round(steps) < 1:
        err("T", f"T/k = {steps!r} is not a positive integer", NonIntegralHorizon)


def initial_field(cfg):
    """Initial vorticity (or velocity pair) per the configured kind."""
    grid = sp.Grid2D(cfg.nx, cfg.ny, cfg.lx, cfg.ly)
    m, eps = cfg.m, cfg.perturb_amplitude
    if cfg.initial == "zero":
        psi = sp.zero_field(grid)
    elif cfg.initial == "basic":
        psi = sp.field_from_function(grid, lambda x, y: np.sin(m * y) + 0 * x)
    elif cfg.initial == "stability":
        psi = sp.field_from_function(
            grid, lambda x, y: np.sin(m * y) + eps * np.sin(m * x) * np.sin(m * y)
        )
    elif cfg.initial == "bursting":
        jx, jy = cfg.burst_perturb_jx, cfg.burst_perturb_jy
        psi = sp.field_from_function(
            grid, lambda x, y: np.sin(m * y) + eps * np.sin(jx * x) * np.sin(jy * y)
        )
    elif cfg.initial == "manufactured":
        case = model.manufactured_case_table3()
        omega = sp.field_from_function(grid, lambda x, y: case.omega(0.0, x, y))
        if cfg.scheme == "fsav_bdf2_primitive":
            raise ConfigError("manufactured runs use the vorticity form")
        return omega
    elif cfg.initial == "random":
        rng = np.random.default_rng(cfg.seed)
        vals = rng.standard_normal((grid.nx, grid.ny))
        vals -= vals.mean()
        psi_raw = sp.forward(sp.RealField2D(grid, vals))
        psi = sp.dealias_23(psi_raw)
    else:  # pragma: no cover - guarded by _validate
        raise ConfigError(f"unknown initial condition {cfg.initial!r}")

    if cfg.scheme == "fsav_bdf2_primitive":
        return model.velocity_from_streamfunction(psi)
    return sp.SpectralField2D(grid, grid.k2 * psi.coeffs)


def format_float(x):
    return repr(float(x))


def write_timeseries(path, records):
    """Write TimeSeriesRecord rows; floats keep 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            row = (
                r.t, r.l2_omega, r.h1_omega, r.max_omega, r.q,
                r.e_gnorm, r.energy_residual, r.mode_re, r.mode_im,
            )
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_timeseries(path):
    from .diagnostics import TimeSeriesRecord

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ParseError(f"unexpected header {header!r}", row=0)
        records = []
        for idx, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 9:
                raise ParseError(f"expected 9 fields, got {len(parts)}", row=idx)
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(str(exc), row=idx) from None
            records.append(TimeSeriesRecord(*vals))
    return records


def _vorticity_phys_levels(state, cfg):
    """Physical vorticity arrays for checkpointing (curl of primitive states)."""
    if isinstance(state.w_n, tuple):
        levels = []
        for pair in (state.w_n, state.w_nm1):
            om = model.curl(pair)
            levels.append(_fft.ifft2(om.coeffs, norm="forward", workers=_WORKERS).real)
        return levels
    return [state.w_n_phys, state.w_nm1_phys]


def write_checkpoint(path, state, run_cfg):
    """Binary state dump: header + two vorticity levels (n then n-1)."""
    if state.w_nm1 is None:
        raise ValueError("checkpointing requires a two-level state")
    grid = state.w_n[0].grid if isinstance(state.w_n, tuple) else state.w_n.grid
    header = _HEADER_STRUCT.pack(
        _MAGIC,
        _FORMAT_VERSION,
        grid.nx,
        grid.ny,
        grid.lx,
        grid.ly,
        state.t,
        state.step,
        state.q_n,
        state.q_nm1,
        _SCHEME_TAGS[run_cfg.scheme],
    )
    w_n, w_nm1 = _vorticity_phys_levels(state, run_cfg)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(w_n.T, dtype="<f8").tobytes())   # x fastest
        fh.write(np.ascontiguousarray(w_nm1.T, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Returns (meta dict, w_n_phys, w_nm1_phys) after validating the layout."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_STRUCT.size:
        raise CorruptCheckpoint("file shorter than header")
    magic, version, nx, ny, lx, ly, t, step, q_n, q_nm1, tag = _HEADER_STRUCT.unpack_from(raw)
    if magic != _MAGIC:
        raise CorruptCheckpoint(f"bad magic {magic!r}")
    if version != _FORMAT_VERSION:
        raise CorruptCheckpoint(f"unsupported format version {version}")
    if tag not in _TAG_SCHEMES:
        raise CorruptCheckpoint(f"unknown scheme tag {tag}")
    want = _HEADER_STRUCT.size + 2 * nx * ny * 8
    if len(raw) != want:
        raise CorruptCheckpoint(f"payload length {len(raw)} != expected {want}")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER_STRUCT.size)
    w_n = np.ascontiguousarray(flat[: nx * ny].reshape(ny, nx).T)
    w_nm1 = np.ascontiguousarray(flat[nx * ny :].reshape(ny, nx).T)
    meta = {
        "nx": nx, "ny": ny, "lx": lx, "ly": ly,
        "t": t, "step": step, "q_n": q_n, "q_nm1": q_nm1,
        "scheme": _TAG_SCHEMES[tag],
    }
    return meta, w_n, w_nm1


def state_from_checkpoint(path, run_cfg):
    """Rebuild a SolverState; the physical arrays are taken verbatim, so the
    spectral levels match the writing run bitwise (vorticity schemes)."""
    meta, w_n, w_nm1 = read_checkpoint(path)
    if (meta["nx"], meta["ny"]) != (run_cfg.nx, run_cfg.ny):
        raise CorruptCheckpoint(
            f"checkpoint grid {meta['nx']}x{meta['ny']} != config {run_cfg.nx}x{run_cfg.ny}"
        )
    if meta["scheme"] != run_cfg.scheme:
        raise CorruptCheckpoint(f"checkpoint scheme {meta['scheme']} != config {run_cfg.scheme}")
    grid = sp.Grid2D(run_cfg.nx, run_cfg.ny, run_cfg.lx, run_cfg.ly)
    if meta["scheme"] == "fsav_bdf2_primitive":
        # velocity is recovered from vorticity in the mean-zero gauge;
        # continuation is exact in value but not bitwise
        levels = []
        for phys in (w_n, w_nm1):
            om = sp.forward(sp.RealField2D(grid, phys))
            u = model.velocity_from_streamfunction(sp.inv_neg_laplacian(om))
            levels.append(u)
        pair_n, phys_n = stepper._canonical_pair(grid, levels[0][0].coeffs, levels[0][1].coeffs)
        pair_m, phys_m = stepper._canonical_pair(grid, levels[1][0].coeffs, levels[1][1].coeffs)
        return stepper.SolverState(
            pair_n, pair_m, meta["q_n"], meta["q_nm1"], meta["t"], meta["step"], phys_n, phys_m
        )
    f_n = sp.SpectralField2D(grid, _fft.fft2(w_n, norm="forward", workers=_WORKERS))
    f_m = sp.SpectralField2D(grid, _fft.fft2(w_nm1, norm="forward", workers=_WORKERS))
    return stepper.SolverState(
        f_n, f_m, meta["q_n"], meta["q_nm1"], meta["t"], meta["step"], w_n, w_nm1
    )
