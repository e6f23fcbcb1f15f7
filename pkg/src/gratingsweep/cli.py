"""Command line entry point.

Subcommands ``solve``, ``sweep``, ``reference``, ``average`` and ``greens``
all read a JSON configuration (``--config``).  Exit status is 0 on success,
2 for configuration problems and 3 for numerical failures; in the last case a
JSON error report goes to ``--out-json`` (or stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time

import numpy as np

from . import greens
from .band_average import band_average
from .bem import GeometryError, solve_derivatives
from .config import ConfigError, RunConfig
from .farfield import IndicatorUndefinedError, accuracy_indicator, far_coeffs, transmittance
from .reference import bem_point_solver, reference_J
from .sweep import adaptive_partition, bem_solver, sweep_eval

log = logging.getLogger("gratingsweep")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TIMING_NOTE = ("wall times come from a dense LU solver without fast multipole or "
               "hierarchical-matrix acceleration and are not comparable to accelerated solvers")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, omega, T, R, index, is_center):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "T", "R", "subband_index", "is_center"])
        for row in zip(omega, T, R, index, is_center):
            w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2]), int(row[3]), int(row[4])])


def read_csv(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]} if rows else {}


def write_json(path, payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, omega: float, order: int, out=None) -> dict:
    """Solve at one frequency and print ``T``, ``R`` and the indicators ``e_i``."""
    out = out or sys.stdout
    params = cfg.lattice()
    mesh = cfg.mesh()
    res = solve_derivatives(mesh, omega, order, params, cfg.ewald_config())
    ff = far_coeffs(res, mesh, params)
    T, R = transmittance(ff, params.theta)
    e = []
    for i in range(order + 1):
        try:
            e.append(accuracy_indicator(ff, i))
        except IndicatorUndefinedError:
            # zero derivative of T; conserved exactly when R's derivative is also zero
            e.append(0.0 if abs(ff.R.coeffs[i]) == 0 else math.inf)
    print(f"omega = {omega:.17g}  elements = {mesh.size}  E = {res.E}", file=out)
    print(f"T = {T.coeffs[0].real:.15f}", file=out)
    print(f"R = {R.coeffs[0].real:.15f}", file=out)
    print(f"{'i':>3} {'T^(i)/i!':>24} {'R^(i)/i!':>24} {'e_i':>12}", file=out)
    for i in range(order + 1):
        print(f"{i:>3} {T.coeffs[i].real:>24.15e} {R.coeffs[i].real:>24.15e} {e[i]:>12.3e}", file=out)
    return {"omega": omega, "T": T.coeffs.real.tolist(), "R": R.coeffs.real.tolist(), "e": e}


def _sweep(cfg: RunConfig):
    params = cfg.lattice()
    mesh = cfg.mesh()
    part = adaptive_partition(cfg.band_tuple, params, cfg.sweep_config(),
                              bem_solver(mesh, params, cfg.ewald_config()))
    return part, band_average(part, params)


def _sweep_payload(cfg, part, ba, wall):
    return {
        "command": "sweep",
        "config": cfg.to_dict(),
        "partition": part.to_dict(),
        "models": [f.to_dict() for f in part.families],
        "J": ba.J,
        "band_average": ba.to_dict(),
        "warnings": list(part.warnings) + list(ba.warnings),
        "solve_count": part.solve_count,
        "timing": {"wall_time_s": wall, "note": TIMING_NOTE},
    }


def cmd_sweep(cfg: RunConfig, csv_path=None, json_path=None, out=None) -> dict:
    out = out or sys.stdout
    t0 = time.perf_counter()
    part, ba = _sweep(cfg)
    n = cfg.output.grid_points
    csv_path = csv_path or cfg.output.csv_path
    if n > 0 and csv_path:
        grid = np.linspace(cfg.band.omega_min, cfg.band.omega_max, n)
        omega = np.concatenate([grid, part.centres])
        flag = np.concatenate([np.zeros(n, int), np.ones(part.n_subbands, int)])
        order = np.lexsort((flag, omega))
        omega, flag = omega[order], flag[order]
        sv = sweep_eval(part, omega)
        write_csv(csv_path, omega, sv.T, sv.R, sv.index, flag)
    payload = _sweep_payload(cfg, part, ba, time.perf_counter() - t0)
    write_json(json_path or cfg.output.json_path, payload)
    print(f"subbands = {part.n_subbands}  solves = {part.solve_count}  J = {ba.J:.10f}", file=out)
    return payload


def cmd_average(cfg: RunConfig, json_path=None, out=None) -> dict:
    out = out or sys.stdout
    t0 = time.perf_counter()
    part, ba = _sweep(cfg)
    payload = _sweep_payload(cfg, part, ba, time.perf_counter() - t0)
    payload["command"] = "average"
    write_json(json_path or cfg.output.json_path, payload)
    print(f"J = {ba.J:.10f}", file=out)
    return payload


def cmd_reference(cfg: RunConfig, csv_path=None, json_path=None, out=None) -> dict:
    out = out or sys.stdout
    params = cfg.lattice()
    mesh = cfg.mesh()
    ref = reference_J(cfg.band_tuple, params, bem_point_solver(mesh, params, cfg.ewald_config()),
                      cfg.reference_config())
    csv_path = csv_path or cfg.output.csv_path
    if csv_path:
        write_csv(csv_path, ref.nodes, ref.T, ref.R, ref.panel_index, np.zeros(ref.nodes.size, int))
    payload = {
        "command": "reference",
        "config": cfg.to_dict(),
        "J": ref.J,
        "panel_borders": ref.panel_borders.tolist(),
        "solve_count": ref.solve_count,
        "warnings": [],
        "timing": {"wall_time_s": ref.wall_time, "note": TIMING_NOTE},
    }
    write_json(json_path or cfg.output.json_path, payload)
    print(f"nodes = {ref.solve_count}  J = {ref.J:.10f}", file=out)
    return payload


def cmd_greens(cfg: RunConfig, case: int | None, omega=None, rho=(0.2, 0.0), order: int = 6,
               out=None) -> dict:
    """Print ``G_p1^(i)`` and ``G_p2^(i)`` tables with series term counts."""
    out = out or sys.stdout
    if case in greens.APPENDIX_CASES:
        spec = greens.APPENDIX_CASES[case]
        g1, g2, ctx = greens.appendix_table(case, order)
        title = spec.name
        rho = spec.rho
    else:
        if omega is None:
            raise ConfigError("a custom greens table needs --omega")
        params = cfg.lattice()
        ecfg = cfg.ewald_config()
        ctx = greens.EwaldContext(float(omega), order, params, ecfg)
        fact = np.array([math.factorial(i) for i in range(order + 1)], dtype=float)
        g1 = ctx.evaluate(*rho, derivs=False, parts="gp1")[0] * fact
        n1 = ctx.last_counts.copy()
        g2 = ctx.evaluate(*rho, derivs=False, parts="gp2")[0] * fact
        ctx.last_counts[:2] = n1[:2]
        title = "Custom"
    counts = ctx.last_counts
    print(f"{title}: E = {ctx.E!r}  rho = {tuple(rho)}", file=out)
    print(f"terms: lattice images |n| <= {counts[0]}, exponential integrals j < {counts[1]}, "
          f"spectral orders |m| <= {counts[2]}", file=out)
    for name, g in (("G_p1", g1), ("G_p2", g2)):
        print(f"{title}: {name}^(i)", file=out)
        for i, v in enumerate(g):
            print(f"{i:>3} {v.real: .17e} {v.imag:+.17e}i", file=out)
    return {"case": case, "E": ctx.E, "gp1": [[v.real, v.imag] for v in g1],
            "gp2": [[v.real, v.imag] for v in g2], "counts": counts.tolist()}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gratingsweep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "reference", "average", "greens"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out-csv")
        s.add_argument("--out-json")
        s.add_argument("--order", type=int)
        s.add_argument("--omega", type=float)
        s.add_argument("--case", type=int)
        if name == "greens":
            s.add_argument("--rho", type=float, nargs=2, default=(0.2, 0.0))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.command == "solve":
            if args.omega is None:
                raise ConfigError("solve needs --omega")
            order = 0 if args.order is None else args.order
            if not 0 <= order <= 40:
                raise ConfigError("--order must lie in [0, 40]")
            payload = cmd_solve(cfg, args.omega, order)
            if args.out_json:
                write_json(args.out_json, payload)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.out_csv, args.out_json)
        elif args.command == "average":
            cmd_average(cfg, args.out_json)
        elif args.command == "reference":
            cmd_reference(cfg, args.out_csv, args.out_json)
        else:
            order = 6 if args.order is None else args.order
            payload = cmd_greens(cfg, args.case, args.omega, tuple(args.rho), order)
            if args.out_json:
                write_json(args.out_json, payload)
    except (ConfigError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        text = write_json(args.out_json, report)
        print(text, file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
