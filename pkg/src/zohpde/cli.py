"""Command-line entry point: eigen / design / simulate / sweep.

Exit codes: 0 success, 2 validation failure, 3 numeric failure, 64 usage
error.  Every command writes a manifest sufficient to reproduce its
outputs byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .analysis import fit_decay
from .backstepping_design import BacksteppingController
from .config import RunConfig, UsageError, load_config
from .errors import NumericFailure
from .fd_oracle import FDGrid, compare_traces, simulate_fd
from .modal_sim import simulate_closed_loop
from .reduced_design import ReducedController
from .runio import fmt, write_csv, write_eigen, write_json, write_manifest, write_trace
from .sl_operator import validate_eigensystem

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out or cfg.get("out.dir")
    if not out:
        raise UsageError("no output directory: pass --out or set out.dir")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_eigen(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    eigsys = cfg.build_eigensystem()
    gains = eigsys.gains
    report = validate_eigensystem(eigsys)
    write_eigen(out, eigsys, gains)
    write_json(
        os.path.join(out, "validation.json"),
        {
            "gram_max_deviation": report.gram_max_deviation,
            "first_positive_index": report.first_positive_index,
            "tail_partial_sums": report.partial_sums,
            "tail_exponent": report.tail_exponent,
            "looks_summable": report.looks_summable,
        },
    )
    write_manifest(out, cfg.text, cfg.get_int("schedule.seed", 0), {"command": "eigen"})
    tol = cfg.get_float("validation.gram_tol", 1e-6)
    if report.gram_max_deviation > tol:
        print(
            f"validation FAILED: Gram deviation {report.gram_max_deviation:.3e} > {tol:.1e}",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    print(f"eigen: {eigsys.n_max} modes, Gram deviation {report.gram_max_deviation:.3e} -> {out}")
    return EXIT_OK


def _controller_json(controller) -> dict:
    if controller is None:
        return {"type": "none"}
    if isinstance(controller, ReducedController):
        return {
            "type": "reduced",
            "m": controller.m,
            "k": controller.k,
            "g": controller.g,
            "lambdas": controller.lambdas,
            "poles": [[p.real, p.imag] for p in np.asarray(controller.closed_loop_poles, dtype=complex)],
            "T_star": controller.bound.T_star,
            "G": controller.bound.G,
            "sigma": controller.bound.sigma,
            "epsilon": controller.bound.epsilon,
            "Gamma": controller.bound.Gamma,
        }
    if isinstance(controller, BacksteppingController):
        return {
            "type": "backstepping",
            "c": controller.c,
            "N": controller.N,
            "gamma": controller.gamma,
            "sigma": controller.sigma,
            "K_tilde": controller.K_tilde,
            "L_tilde": controller.L_tilde,
            "T_star": controller.T_star,
            "k_n": controller.k_n,
        }
    raise TypeError(f"unknown controller type: {type(controller)}")


def cmd_design(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    eigsys = cfg.build_eigensystem()
    controller = cfg.build_controller(eigsys)
    write_json(os.path.join(out, "controller.json"), _controller_json(controller))
    if isinstance(controller, ReducedController):
        write_csv(
            os.path.join(out, "kernel.csv"), ["z", "kernel"], zip(eigsys.grid, controller.kernel)
        )
    elif isinstance(controller, BacksteppingController):
        write_csv(
            os.path.join(out, "kernel.csv"),
            ["s", "k"],
            zip(controller.kernel_grid, controller.kernel_k),
        )
        rows = []
        grid = controller.kernel_grid
        for i, z in enumerate(grid):
            for j in range(i + 1):
                rows.append((z, grid[j], controller.K_surface[i, j]))
        write_csv(os.path.join(out, "kernel_surface.csv"), ["z", "s", "K"], rows)
    write_manifest(out, cfg.text, cfg.get_int("schedule.seed", 0), {"command": "design"})
    tstar = None
    if isinstance(controller, ReducedController):
        tstar = controller.bound.T_star
    elif isinstance(controller, BacksteppingController):
        tstar = controller.T_star
    print(f"design: {_controller_json(controller)['type']} controller, T* = {tstar} -> {out}")
    return EXIT_OK


def _simulate_once(cfg: RunConfig, eigsys, controller, seed_override=None):
    schedule = cfg.build_schedule(seed_override)
    x0 = cfg.build_x0(eigsys)
    t_end = cfg.get_float("sim.t_end")
    if t_end is None:
        raise UsageError("missing required config key: sim.t_end")
    output_dt = cfg.get_float("sim.output_dt")
    if output_dt is None:
        raise UsageError("missing required config key: sim.output_dt")
    snap_raw = cfg.get("sim.snapshots", "all")
    snapshot_times = None
    if snap_raw == "all":
        snapshot_times = "all"
    elif snap_raw and snap_raw != "none":
        snapshot_times = [float(tok) for tok in snap_raw.split(",") if tok.strip()]
    diagnostics = isinstance(controller, BacksteppingController) and cfg.get_bool(
        "sim.diagnostics", True
    )
    trace = simulate_closed_loop(
        eigsys.problem,
        eigsys,
        controller,
        schedule,
        x0,
        t_end,
        output_dt,
        snapshot_times=snapshot_times,
        diagnostics=diagnostics,
    )
    return trace, schedule, x0


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    eigsys = cfg.build_eigensystem()
    controller = cfg.build_controller(eigsys)
    trace, schedule, x0 = _simulate_once(cfg, eigsys, controller, args.seed)
    write_trace(out, "trace", trace)
    extras = {"command": "simulate", "schedule": schedule.descriptor()}
    if args.oracle or cfg.get_bool("oracle.enable", False):
        grid = FDGrid(
            M=cfg.get_int("oracle.M", 400),
            dt=cfg.get_float("oracle.dt", 1e-4),
            theta=cfg.get_float("oracle.theta", 0.5),
        )
        kernel = None
        if controller is not None:
            kernel = controller.boundary_feedback_quadrature(grid.z, eigsys)
        from scipy.interpolate import CubicSpline

        x0_fd = CubicSpline(eigsys.grid, x0)(grid.z)
        fd_trace = simulate_fd(
            eigsys.problem,
            kernel,
            schedule,
            x0_fd,
            cfg.get_float("sim.t_end"),
            cfg.get_float("sim.output_dt"),
            grid,
        )
        write_trace(out, "trace_fd", fd_trace)
        report = compare_traces(trace, fd_trace)
        write_json(
            os.path.join(out, "oracle_comparison.json"),
            {
                "max_rel_snapshot": report.max_rel_snapshot,
                "t_at_max": report.t_at_max,
                "max_rel_norm": report.max_rel_norm,
                "times": report.times,
                "rel_snapshot": report.rel_snapshot,
            },
        )
        extras["oracle"] = {"M": grid.M, "dt": grid.dt, "theta": grid.theta}
        print(f"oracle: max relative L2 snapshot difference {report.max_rel_snapshot:.3e}")
    write_manifest(out, cfg.text, args.seed if args.seed is not None else cfg.get_int("schedule.seed", 0), extras)
    print(f"simulate: {len(trace.t)} rows, final norm {trace.norm_r[-1]:.6e} -> {out}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    raw = args.T_list or cfg.get("sweep.t_values", "")
    if not raw:
        raise UsageError("no sweep periods: pass --T-list or set sweep.t_values")
    t_values = [float(tok) for tok in raw.split(",") if tok.strip()]
    if not t_values:
        raise UsageError("sweep period list is empty")
    eigsys = cfg.build_eigensystem()
    controller = cfg.build_controller(eigsys)
    t_star = None
    if isinstance(controller, ReducedController):
        t_star = controller.bound.T_star
    elif isinstance(controller, BacksteppingController):
        t_star = controller.T_star

    base_seed = args.seed if args.seed is not None else cfg.get_int("schedule.seed", 0)

    def one(T: float):
        sub = RunConfig(entries=dict(cfg.entries), text=cfg.text, base_dir=cfg.base_dir)
        sub.entries["schedule.T"] = fmt(T)
        sub.entries["sim.snapshots"] = "none"
        trace, _, _ = _simulate_once(sub, eigsys, controller, base_seed)
        stable = bool(np.isfinite(trace.norm_r[-1]) and trace.norm_r[-1] < trace.norm_r[0])
        try:
            fit = fit_decay(trace, t_lo=0.2 * float(trace.t[-1]))
            c_est, g_est = fit.c_est, fit.G_est
        except Exception:
            c_est, g_est = float("nan"), float("nan")
        ratio = (T / t_star) if t_star not in (None, 0.0) and np.isfinite(t_star) else float("nan")
        return (T, stable, c_est, g_est, ratio)

    workers = min(len(t_values), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, t_values))
    results.sort(key=lambda row: row[0])
    write_csv(
        os.path.join(out, "sweep.csv"),
        ["T", "stable", "c_est", "G_est", "ratio"],
        ((fmt(T), "1" if st else "0", c, g, r) for (T, st, c, g, r) in results),
    )
    write_manifest(out, cfg.text, base_seed, {"command": "sweep", "T_list": t_values})
    print(f"sweep: {len(results)} runs -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zohpde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("eigen", cmd_eigen),
        ("design", cmd_design),
        ("simulate", cmd_simulate),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides out.dir)")
        p.add_argument("--seed", type=int, default=None, help="schedule seed override")
        if name == "simulate":
            p.add_argument("--oracle", action="store_true", help="also run the reference solver")
        if name == "sweep":
            p.add_argument("--T-list", dest="T_list", default=None, help="comma-separated periods")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
