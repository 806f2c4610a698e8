"""Command line entry point.

Verbs: run, picard, spectrum, resolvent-sweep, diagnose, mms.
Exit codes: 0 success, 1 I/O or configuration failure, 2 blow-up (non-finite
state) abort, 3 Picard non-convergence.  PE_THREADS caps internal
parallelism.
"""

import argparse
import math
import sys

import numpy as np

from . import diagnostics as diag
from .config import RunConfig, manufactured_profile, make_initial, parse_config
from .errors import ConfigurationError, DomainError, NanAbort
from .evolution import (
    ForcingSpec,
    ImexConfig,
    PicardConfig,
    imex_run,
    make_manufactured,
    picard_solve,
)
from .fields import l2_norm
from .io import (
    read_ledger_csv,
    save_checkpoint,
    write_ledger_csv,
    write_report_json,
)
from .stokes import StokesOperator


def _build_forcing(cfg: RunConfig, grid, op):
    if cfg.forcing == "zero":
        return None
    if cfg.forcing == "single-mode":
        return ForcingSpec(
            grid, "single-mode", amplitude=cfg.forcing_amplitude,
            mode=(cfg.forcing_kx, cfg.forcing_ky, cfg.forcing_m),
            rate=cfg.forcing_rate,
        )
    psi = manufactured_profile(grid, cfg.ic)
    return ForcingSpec(grid, "mms", mms=make_manufactured(op, psi))


def _split_series(ledger, forcing):
    from .evolution import forcing_eval

    out = []
    n = len(ledger.times)
    for i in range(n):
        state = ledger.states[i]
        if n >= 3 and 0 < i < n - 1:
            dt_v = (1.0 / (ledger.times[i + 1] - ledger.times[i - 1])) * (
                ledger.states[i + 1] - ledger.states[i - 1]
            )
        else:
            dt_v = None
        f_field = forcing_eval(forcing, ledger.times[i]) if forcing is not None else None
        pi = diag.trajectory_pressure(state, f_field)
        out.append(diag.split_residuals(state, pi, dt_v=dt_v, f_field=f_field))
    return out


def _emit_outputs(cfg, ledger, forcing, extra=None):
    records = diag.build_records(ledger, forcing)
    split = _split_series(ledger, forcing)
    write_ledger_csv(cfg.out_ledger, ledger, records, split)
    report = {
        "samples": len(ledger.times),
        "t_end": ledger.times[-1] if ledger.times else 0.0,
        "e2_final": ledger.e2[-1] if ledger.e2 else 0.0,
    }
    budget = diag.energy_budget(ledger)
    report["energy_residual_max"] = budget.max_residual
    report["energy_residual_relative"] = budget.max_relative_residual
    report["e2_monotone"] = budget.monotone
    gron = diag.gronwall_monitor(ledger, forcing=forcing, records=records)
    report["phi_max"] = gron.phi_max
    report["gronwall_dominated"] = gron.dominated
    report["split_residual_max"] = max(
        (max(s.bar, s.tilde) for s in split[1:-1]), default=0.0
    )
    rates = {}
    for q in ("e2", "d2"):
        try:
            rates[q] = diag.decay_fit(ledger, q).rate
        except ConfigurationError:
            rates[q] = None
    report["decay_rates"] = rates
    if extra:
        report.update(extra)
    write_report_json(cfg.out_report, report)
    if cfg.out_checkpoint:
        save_checkpoint(cfg.out_checkpoint, ledger.states[-1])
    return report


def _trim_overflowed(ledger):
    """Drop trailing samples whose diagnostics overflow (blow-up aborts only)."""
    while len(ledger.times) > 1:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                state = ledger.states[-1]
                diag.record(state, ledger.times[-1], diag.trajectory_pressure(state))
            break
        except ConfigurationError:
            for lst in (ledger.times, ledger.states, ledger.e2, ledger.d2,
                        ledger.d2_int, ledger.fwork_int):
                lst.pop()
    return ledger


def _load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def cmd_run(args):
    cfg = _load_config(args.config)
    grid = cfg.grid()
    op = StokesOperator(grid)
    a = make_initial(cfg.ic, grid)
    if cfg.ic.kind == "manufactured" and cfg.forcing == "mms":
        forcing = _build_forcing(cfg, grid, op)
        a = forcing.mms.initial()
    else:
        forcing = _build_forcing(cfg, grid, op)
    icfg = ImexConfig(dt=cfg.dt, t_end=cfg.t_end,
                      order=1 if cfg.scheme == "imex1" else 2,
                      sample_every=cfg.sample_every, cfl_limit=cfg.cfl_limit)
    try:
        ledger = imex_run(a, forcing, icfg, op)
    except NanAbort as err:
        _emit_outputs(cfg, _trim_overflowed(err.ledger), forcing,
                      extra={"status": "nan-abort"})
        print(f"aborted: {err}", file=sys.stderr)
        return 2
    _emit_outputs(cfg, ledger, forcing, extra={"status": "completed"})
    print(f"completed t = {ledger.times[-1]:g}, E2 = {ledger.e2[-1]:.6e}")
    return 0


def cmd_picard(args):
    cfg = _load_config(args.config)
    grid = cfg.grid()
    op = StokesOperator(grid)
    a = make_initial(cfg.ic, grid)
    forcing = _build_forcing(cfg, grid, op)
    pcfg = PicardConfig(horizon=cfg.t_end, nodes=cfg.picard_nodes,
                        max_iterations=cfg.picard_max_iterations,
                        tolerance=cfg.picard_tolerance)
    ledger, report = picard_solve(a, forcing, pcfg, op)
    extra = {
        "status": "converged" if report.converged else "non-convergence",
        "picard_iterations": report.iterations,
        "picard_k_history": list(report.k_history),
        "picard_changes": list(report.change_history),
    }
    _emit_outputs(cfg, ledger, forcing, extra=extra)
    if not report.converged:
        print("Picard iteration did not converge", file=sys.stderr)
        return 3
    print(f"converged in {report.iterations} iterations, "
          f"final k = {report.k_history[-1]:.6e}")
    return 0


def _grid_from_args(args):
    from .grid import Grid

    return Grid(args.nx, args.ny, args.nz, args.h)


def cmd_spectrum(args):
    op = StokesOperator(_grid_from_args(args))
    rep = op.spectrum()
    print(f"beta = {rep.beta!r}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("kx,ky,eigenvalue\n")
            for (kx, ky), evs in rep.entries:
                for ev in evs:
                    fh.write(f"{kx},{ky},{float(ev)!r}\n")
    return 0


def cmd_resolvent_sweep(args):
    op = StokesOperator(_grid_from_args(args))
    rep = op.sector_sweep(args.eps)
    with open(args.out, "w") as fh:
        fh.write("re_lambda,im_lambda,M_lambda\n")
        for lam, m in rep.rows:
            fh.write(f"{lam.real!r},{lam.imag!r},{m!r}\n")
    print(f"sup M = {rep.sup_m!r} (bound 1/sin(eps) = {1.0 / math.sin(args.eps)!r})")
    return 0


def cmd_diagnose(args):
    cols = read_ledger_csv(args.ledger)
    t = cols["t"]
    e2 = cols["e2"]
    resid = [
        e2[i] + 2 * cols["d2_int"][i] - 2 * cols["fwork_int"][i] - e2[0]
        for i in range(len(t))
    ]
    phi = [
        8 * cols["grad_h_bar"][i] + cols["vz2"][i] + 0.25 * cols["tilde4"][i]
        for i in range(len(t))
    ]
    rates = {}
    for q in ("e2", "d2"):
        rates[q] = _tail_rate(t, cols[q])
    split_max = max(
        (max(b, s) for b, s in zip(cols["bar_residual"][1:-1],
                                   cols["tilde_residual"][1:-1])),
        default=0.0,
    )
    report = {
        "energy_residual_max": max(abs(r) for r in resid),
        "phi_max": max(phi),
        "decay_rates": rates,
        "split_residual_max": split_max,
    }
    write_report_json(args.out, report)
    print(f"energy residual max = {report['energy_residual_max']:.3e}, "
          f"phi max = {report['phi_max']:.3e}")
    return 0


def _tail_rate(t, q, tail_fraction=0.5):
    start = int(len(t) * (1 - tail_fraction))
    tt, qq = np.asarray(t[start:]), np.asarray(q[start:])
    pos = qq > 0
    if not pos.all():
        stop = int(np.argmin(pos))
        tt, qq = tt[:stop], qq[:stop]
    if len(tt) < 10 or np.ptp(tt) == 0:
        return None
    coef = np.polynomial.polynomial.polyfit(tt, np.log(qq), 1)
    return -float(coef[1])


def cmd_mms(args):
    cfg = _load_config(args.config) if args.config else RunConfig()
    grid = cfg.grid()
    op = StokesOperator(grid)
    psi = manufactured_profile(grid, cfg.ic)
    mms = make_manufactured(op, psi)
    spec = ForcingSpec(grid, "mms", mms=mms)
    errors = []
    dt = args.dt
    for _ in range(args.levels):
        icfg = ImexConfig(dt=dt, t_end=args.t_end, sample_every=10**9)
        ledger = imex_run(mms.initial(), spec, icfg, op)
        exact = mms.solution(ledger.times[-1])
        errors.append(l2_norm(ledger.states[-1] - exact) / l2_norm(exact))
        dt /= 2
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    report = {"dt_base": args.dt, "t_end": args.t_end,
              "errors": errors, "observed_orders": orders}
    if args.out:
        write_report_json(args.out, report)
    print("errors:", " ".join(f"{e:.3e}" for e in errors))
    print("observed orders:", " ".join(f"{o:.3f}" for o in orders))
    return 0


def _add_grid_args(p):
    p.add_argument("--nx", type=int, default=32)
    p.add_argument("--ny", type=int, default=32)
    p.add_argument("--nz", type=int, default=16)
    p.add_argument("--h", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pe",
        description="Spectral solver and verification harness for the "
                    "hydrostatic primitive equations",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="march with the IMEX scheme")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("picard", help="iterate the mild-solution scheme")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("spectrum", help="eigenvalues of the viscous operator")
    _add_grid_args(p)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("resolvent-sweep", help="sectorial resolvent bound sweep")
    _add_grid_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resolvent_sweep)

    p = sub.add_parser("diagnose", help="summarize a ledger CSV")
    p.add_argument("--ledger", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("mms", help="manufactured-solution convergence study")
    p.add_argument("--config", default="")
    p.add_argument("--dt", type=float, default=2e-3)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--t-end", dest="t_end", type=float, default=0.25)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_mms)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ConfigurationError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
