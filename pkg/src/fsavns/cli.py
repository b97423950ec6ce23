"""Command-line entry point: converge / simulate / bursting / verify.

Exit codes: 0 success, 1 config error, 2 blow-up, 3 internal invariant
violation. Each command prints one machine-readable JSON result line on
stdout; file artifacts land under the output directory.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import abstract_fsav as af, diagnostics as dg, fileio, model, spectral as sp, stepper
from .errors import (
    BlowUp,
    ConfigError,
    DenominatorNonpositive,
    DivergenceViolation,
    FsavError,
    InternalInvariantViolation,
)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list
    status: str = "completed"


def _load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fileio.parse_config(fh.read())


def _ensure_outdir(rc, out_override):
    out = out_override or rc.output_dir
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------- converge


def _converge_one(args):
    rc, k = args
    rc = replace(rc, k=k, forcing="manufactured", initial="manufactured")
    cfg = rc.scheme_config()
    case = model.manufactured_case_table3()
    t0 = time.perf_counter()
    try:
        final = stepper.run(fileio.initial_field(rc), cfg, T=rc.T)
    except BlowUp as exc:
        # recorded per-row; a diverging step size must not kill the sweep
        return {
            "k": k, "status": "blowup", "blowup_t": exc.t,
            "error_omega": float("nan"), "error_psi": float("nan"),
            "q_error": float("nan"), "runtime_s": time.perf_counter() - t0,
        }
    runtime = time.perf_counter() - t0
    g = cfg.grid
    x, y = g.meshgrid()
    exact_w = np.broadcast_to(case.omega(rc.T, x, y), (g.nx, g.ny))
    err_w = float(np.max(np.abs(sp.to_physical(final.w_n) - exact_w)) / np.max(np.abs(exact_w)))
    psi = stepper.streamfunction_at(final.w_n, cfg, rc.T)
    exact_p = np.broadcast_to(case.psi(rc.T, x, y), (g.nx, g.ny))
    err_p = float(np.max(np.abs(sp.to_physical(psi) - exact_p)) / np.max(np.abs(exact_p)))
    return {
        "k": k,
        "status": "completed",
        "blowup_t": float("nan"),
        "error_omega": err_w,
        "error_psi": err_p,
        "q_error": abs(final.q_n - 1.0),
        "runtime_s": runtime,
    }


def cmd_converge(rc, k_list, out_dir, jobs=None):
    """Manufactured-solution sweep; observed orders from consecutive halvings."""
    ks = sorted(k_list, reverse=True)
    if len(ks) == 1:
        rows = [_converge_one((rc, ks[0]))]
    else:
        workers = jobs or min(len(ks), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_converge_one, [(rc, k) for k in ks]))
    rows.sort(key=lambda r: -r["k"])
    for i, row in enumerate(rows):
        prev = rows[i - 1] if i > 0 else None
        halved = (
            prev is not None
            and prev["status"] == "completed"
            and row["status"] == "completed"
            and abs(prev["k"] / row["k"] - 2.0) < 1e-9
        )
        for name in ("omega", "psi"):
            key = f"order_{name}"
            row[key] = (
                float(np.log2(prev[f"error_{name}"] / row[f"error_{name}"])) if halved else float("nan")
            )

    path = os.path.join(out_dir, "converge.csv")
    cols = ["k", "status", "error_omega", "order_omega", "error_psi", "order_psi",
            "q_error", "blowup_t", "runtime_s"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(
                row[c] if c == "status" else fileio.format_float(row[c]) for c in cols
            ) + "\n")
    return ExperimentResult("converge", rows)


# ---------------------------------------------------------------- simulate


def _snapshot_steps(rc):
    steps = {}
    for t in rc.snapshot_times:
        s = round(t / rc.k)
        if s < 1 or abs(t - s * rc.k) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"snapshot time {t:g} is not a positive multiple of k")
        steps[s] = t
    return steps


def _simulate(rc, out_dir, resume=None, max_wall_seconds=None):
    cfg = rc.scheme_config()
    records = []
    snap_steps = _snapshot_steps(rc)
    if snap_steps:
        os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)

    def on_sample(rec, state):
        records.append(rec)

    def on_step(state, report):
        if rc.checkpoint_every and state.step % rc.checkpoint_every == 0:
            fileio.write_checkpoint(os.path.join(out_dir, f"ckpt_{state.step}.fsav"), state, rc)
        if state.step in snap_steps:
            t = snap_steps[state.step]
            fileio.write_checkpoint(
                os.path.join(out_dir, "snapshots", f"omega_{t:g}.fsav"), state, rc
            )

    initial = fileio.state_from_checkpoint(resume, rc) if resume else fileio.initial_field(rc)
    deadline = time.monotonic() + max_wall_seconds if max_wall_seconds is not None else None
    status = "completed"
    blowup = None
    try:
        state = stepper.run(
            initial,
            cfg,
            T=rc.T,
            sample_every=rc.sample_every,
            on_sample=on_sample,
            on_step=on_step,
            tracked_mode=(rc.tracked_jx, rc.tracked_jy),
            wall_deadline=deadline,
        )
        if state.t < rc.T - 0.5 * rc.k:
            status = "paused"
            fileio.write_checkpoint(os.path.join(out_dir, f"ckpt_{state.step}.fsav"), state, rc)
    except BlowUp as exc:
        status = "blowup"
        blowup = exc
        state = None
    fileio.write_timeseries(os.path.join(out_dir, "series.csv"), records)
    return status, state, records, blowup


def cmd_simulate(rc, out_dir, resume=None, max_wall_seconds=None):
    status, state, records, blowup = _simulate(rc, out_dir, resume, max_wall_seconds)
    result = {"experiment": "simulate", "status": status, "series": os.path.join(out_dir, "series.csv")}
    if status == "blowup":
        result["blowup_t"] = blowup.t
        result["blowup_step"] = blowup.step
    elif status == "paused":
        result["resume"] = os.path.join(out_dir, f"ckpt_{state.step}.fsav")
        result["t"] = state.t
    else:
        result["t"] = state.t
        result["final_l2_omega"] = records[-1].l2_omega if records else None
    print(json.dumps(result))
    return 2 if status == "blowup" else 0


# ---------------------------------------------------------------- bursting


def _uniform_records(records):
    """Drop a trailing off-cadence sample so the series is uniform."""
    if len(records) >= 3:
        d0 = records[1].t - records[0].t
        if abs((records[-1].t - records[-2].t) - d0) > 1e-9 * max(d0, 1.0):
            return records[:-1]
    return records


def postprocess_bursting(records, rc, out_dir):
    records = _uniform_records(records)
    series = [(r.t, r.max_omega) for r in records]
    events = dg.detect_bursts(
        series,
        warmup=rc.burst_warmup,
        open_sigma=rc.burst_open_sigma,
        close_sigma=rc.burst_close_sigma,
        merge_gap=rc.burst_merge_gap,
    )
    with open(os.path.join(out_dir, "bursts.csv"), "w", encoding="utf-8") as fh:
        fh.write("t_start,t_peak,t_end,peak_value\n")
        for ev in events:
            fh.write(
                ",".join(fileio.format_float(v) for v in (ev.t_start, ev.t_peak, ev.t_end, ev.peak_value))
                + "\n"
            )
    intervals = [b.t_peak - a.t_peak for a, b in zip(events, events[1:])]
    with open(os.path.join(out_dir, "intervals.csv"), "w", encoding="utf-8") as fh:
        fh.write("index,interval\n")
        for i, dt in enumerate(intervals):
            fh.write(f"{i},{fileio.format_float(dt)}\n")
    spec = dg.psd(series)
    with open(os.path.join(out_dir, "psd.csv"), "w", encoding="utf-8") as fh:
        fh.write("freq,power\n")
        for f, p in spec:
            fh.write(f"{fileio.format_float(f)},{fileio.format_float(p)}\n")
    return events, intervals, spec


def cmd_bursting(rc, out_dir, resume=None, max_wall_seconds=None):
    status, state, records, blowup = _simulate(rc, out_dir, resume, max_wall_seconds)
    if status == "blowup":
        print(json.dumps({"experiment": "bursting", "status": "blowup", "blowup_t": blowup.t}))
        return 2
    events, intervals, spec = postprocess_bursting(records, rc, out_dir)
    result = {
        "experiment": "bursting",
        "status": status,
        "bursts": len(events),
        "burst_peaks": [ev.t_peak for ev in events],
        "intervals": intervals,
    }
    print(json.dumps(result))
    return 0


# ---------------------------------------------------------------- verify


def _verify_energy_suite(name, cfg, initial, steps):
    state = initial if isinstance(initial, stepper.SolverState) else stepper.initial_state(initial)
    worst_resid = 0.0
    base = 3.0 / (2.0 * cfg.k) + cfg.gamma
    min_margin = np.inf
    for _ in range(steps):
        state, report = stepper._step_once(state, cfg)
        if report is not None:
            worst_resid = max(worst_resid, report.energy_identity_residual)
            min_margin = min(min_margin, report.q_denominator - base)
    ok = worst_resid < 1e-10 and min_margin > -1e-12 * base
    print(f"suite {name}: max energy-identity residual {worst_resid:.3e}, "
          f"min denominator margin {min_margin:.3e} -> {'ok' if ok else 'FAIL'}")
    return ok


def _verify_toy_suite(k, steps=100_000):
    sysm = af.ToyTriad()
    state = af.initial_abstract_state(np.zeros(3))
    sup = 0.0
    worst = 0.0
    for i in range(steps):
        state, rep = af.abstract_step(state, sysm, k=k, gamma=1.0)
        sup = max(sup, float(np.linalg.norm(state.u_n)) + abs(state.q_n))
        if i > 0:
            worst = max(worst, rep.energy_identity_residual)
    ok = np.isfinite(sup) and sup < 1e3 and worst < 1e-10
    print(f"suite toy-triad k={k:g}: sup ||u||+|q| = {sup:.3f}, "
          f"max residual {worst:.3e} -> {'ok' if ok else 'FAIL'}")
    return ok


def _verify_steady_suite(steps=200):
    grid = sp.Grid2D(32, 32, 2 * np.pi, 2 * np.pi)
    cfg = stepper.SchemeConfig(
        k=0.01, re=100.0, grid=grid, forcing=model.ForcingSpec("kolmogorov", m=2, re=100.0)
    )
    psi = sp.field_from_function(grid, lambda x, y: np.sin(2 * y) + 0 * x)
    omega = sp.SpectralField2D(grid, grid.k2 * psi.coeffs)
    ref = sp.to_physical(omega)
    state = stepper._with_two_levels(stepper.initial_state(omega))
    for _ in range(steps):
        state, _ = stepper.step_fsav_bdf2_sv(state, cfg)
    drift = float(np.max(np.abs(state.w_n_phys - ref))) / float(np.max(np.abs(ref)))
    ok = drift < 1e-10 and abs(state.q_n - 1.0) < 1e-12
    print(f"suite steady-state: relative drift {drift:.3e} after {steps} steps, "
          f"|q-1| = {abs(state.q_n - 1.0):.3e} -> {'ok' if ok else 'FAIL'}")
    return ok


def _verify_system_suite():
    rep_toy = af.verify_system(af.ToyTriad(), trials=50)
    cfg = stepper.SchemeConfig(
        k=0.01, re=40.0, grid=sp.Grid2D(32, 32, 2 * np.pi, 2 * np.pi),
        forcing=model.ForcingSpec("kolmogorov", m=2, re=40.0),
    )
    rep_nse = af.verify_system(af.StreamfunctionNSE(cfg), trials=20)
    ok = (
        rep_toy.max_symmetry_defect < 1e-12
        and rep_toy.max_energy_flux < 1e-12
        and rep_toy.min_positivity > 0
        and rep_nse.max_symmetry_defect < 1e-10
        and rep_nse.max_energy_flux < 1e-10
        and rep_nse.min_positivity > 0
    )
    print(f"suite abstract-system: toy flux {rep_toy.max_energy_flux:.3e}, "
          f"nse flux {rep_nse.max_energy_flux:.3e} -> {'ok' if ok else 'FAIL'}")
    return ok


def cross_formulation_discrepancy(n, k, T, re=100.0):
    """Vorticity gap at T between the primitive and streamfunction solvers."""
    grid = sp.Grid2D(n, n, 2 * np.pi, 2 * np.pi)
    psi0 = sp.field_from_function(
        grid, lambda x, y: np.sin(2 * y) + 0.05 * np.sin(2 * x) * np.sin(2 * y) + 0.05 * np.sin(x) * np.sin(y)
    )
    f_sv = stepper.SchemeConfig(
        k=k, re=re, grid=grid, forcing=model.ForcingSpec("kolmogorov", m=2, re=re)
    )
    f_pr = stepper.SchemeConfig(
        k=k, re=re, grid=grid, scheme="fsav_bdf2_primitive",
        forcing=model.ForcingSpec("kolmogorov", m=2, re=re),
    )
    omega0 = sp.SpectralField2D(grid, grid.k2 * psi0.coeffs)
    u0 = model.velocity_from_streamfunction(psi0)
    sv = stepper.run(omega0, f_sv, T=T)
    pr = stepper.run(u0, f_pr, T=T)
    omega_pr = model.curl(pr.w_n)
    scale = sp.norms(sv.w_n)[2]
    return float(np.max(np.abs(sp.to_physical(omega_pr) - sp.to_physical(sv.w_n)))) / scale


def _verify_cross_suite():
    # 64^2 keeps the aliasing mismatch of the two nonlinear forms far below
    # the O(k^2) temporal difference being measured
    errs = [cross_formulation_discrepancy(64, k, T=0.4) for k in (4e-3, 2e-3)]
    order = float(np.log2(errs[0] / errs[1]))
    ok = order >= 1.8
    print(f"suite cross-formulation: discrepancies {errs[0]:.3e} / {errs[1]:.3e}, "
          f"observed order {order:.2f} -> {'ok' if ok else 'FAIL'}")
    return ok


def cmd_verify():
    grid_t = sp.Grid2D(64, 64, 2 * np.pi, 2 * np.pi)
    psi = sp.field_from_function(
        grid_t, lambda x, y: np.sin(2 * y) + 0.001 * np.sin(2 * x) * np.sin(2 * y)
    )
    kol_cfg = stepper.SchemeConfig(
        k=0.01, re=100.0, grid=grid_t, forcing=model.ForcingSpec("kolmogorov", m=2, re=100.0)
    )
    kol_omega = sp.SpectralField2D(grid_t, grid_t.k2 * psi.coeffs)

    man_rc = fileio.RunConfig(
        nx=32, ny=32, lx=1.0, ly=1.0, k=0.0125, re=10.0,
        forcing="manufactured", initial="manufactured", T=1.0,
    )

    prim_cfg = stepper.SchemeConfig(
        k=0.01, re=100.0, grid=sp.Grid2D(32, 32, 2 * np.pi, 2 * np.pi),
        scheme="fsav_bdf2_primitive", forcing=model.ForcingSpec("kolmogorov", m=2, re=100.0),
    )
    prim_psi = sp.field_from_function(
        prim_cfg.grid, lambda x, y: np.sin(2 * y) + 0.01 * np.sin(x) * np.sin(y)
    )

    checks = [
        _verify_energy_suite("manufactured", man_rc.scheme_config(), fileio.initial_field(man_rc), 120),
        _verify_energy_suite("kolmogorov", kol_cfg, kol_omega, 120),
        _verify_energy_suite(
            "primitive", prim_cfg, model.velocity_from_streamfunction(prim_psi), 120
        ),
        _verify_toy_suite(k=10.0),
        _verify_steady_suite(),
        _verify_system_suite(),
        _verify_cross_suite(),
    ]
    ok = all(checks)
    print(json.dumps({"experiment": "verify", "status": "ok" if ok else "failed",
                      "suites_passed": sum(checks), "suites_total": len(checks)}))
    return 0 if ok else 3


# ---------------------------------------------------------------- entry


def build_parser():
    p = argparse.ArgumentParser(prog="fsavns", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp_):
        sp_.add_argument("--config", required=True, help="path to a key = value config file")
        sp_.add_argument("--out", default=None, help="output directory (default: config output_dir)")

    pc = sub.add_parser("converge", help="manufactured-solution convergence sweep")
    add_common(pc)
    pc.add_argument("--k", default=None, help="comma-separated time steps (default: config k)")
    pc.add_argument("--jobs", type=int, default=None, help="worker processes")

    ps = sub.add_parser("simulate", help="run one simulation, emit series/checkpoints")
    add_common(ps)
    ps.add_argument("--max-wall-seconds", type=float, default=None)
    ps.add_argument("--resume", default=None, help="checkpoint to continue from")

    pb = sub.add_parser("bursting", help="simulate + burst statistics post-processing")
    add_common(pb)
    pb.add_argument("--max-wall-seconds", type=float, default=None)
    pb.add_argument("--resume", default=None)

    sub.add_parser("verify", help="run the invariant property suites")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify()
        rc = _load_config(args.config)
        out_dir = _ensure_outdir(rc, args.out)
        if args.command == "converge":
            ks = [float(v) for v in args.k.split(",")] if args.k else [rc.k]
            result = cmd_converge(rc, ks, out_dir, jobs=args.jobs)
            print(json.dumps({"experiment": "converge", "rows": result.rows}))
            return 0
        if args.command == "simulate":
            return cmd_simulate(rc, out_dir, resume=args.resume, max_wall_seconds=args.max_wall_seconds)
        if args.command == "bursting":
            return cmd_bursting(rc, out_dir, resume=args.resume, max_wall_seconds=args.max_wall_seconds)
    except ConfigError as exc:
        print(json.dumps({"status": "config_error", "message": str(exc)}))
        return 1
    except (DenominatorNonpositive, InternalInvariantViolation, DivergenceViolation) as exc:
        print(json.dumps({"status": "invariant_violation", "message": str(exc)}))
        return 3
    except FsavError as exc:
        print(json.dumps({"status": "error", "message": str(exc)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
