"""Command-line driver: ``causalw {validate, wigner, switch}``.

Exit codes: 0 success, 1 a check failed (or the switch config is singular),
2 the input could not be read or parsed.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import fixtures, phase_space, switch
from .finite_process import InvalidProcessError, check_decomposition, check_order, validate_w
from .propagation import CausticError, SingularFormError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _out_dir(args) -> str | None:
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write(out, name, text):
    if out is not None:
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)


# -- validate ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        fx = fixtures.load_process_fixture(args.file)
    except fixtures.FixtureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    w = fx["w"]
    tol = args.tol if args.tol is not None else w.tolerance
    rep = validate_w(w, tol)
    rows = [("condition", "deviation", "passed")]
    print(f"process {fx['name'] or args.file}: dims {dict(zip(w.op.names, w.op.dims))}, tol {tol:g}")
    for c, line in zip(rep.conditions, rep.lines()):
        print("  " + line)
        rows.append((c.name, repr(c.deviation), str(c.passed).lower()))
    ok = rep.passed
    if not ok:
        print(f"failed: {', '.join(rep.failed())}")
    if ok and fx["order"]:
        orep = check_order(w, fx["order"], tol)
        for name, dev in orep.deviations.items():
            print(f"  order {fx['order']}: {name:<14s} deviation={dev:.3e}")
            rows.append((f"order {fx['order']}: {name}", repr(dev), str(dev <= tol).lower()))
        ok = orep.passed
        print(f"order {fx['order']}: {'PASS' if orep.passed else 'FAIL'}")
    if ok and fx["decomposition"] is not None:
        try:
            dec_ok = check_decomposition(w, fx["decomposition"], tol)
        except InvalidProcessError as exc:
            print(f"decomposition: FAIL ({exc})")
            dec_ok = False
        else:
            print(f"decomposition (lambda={fx['decomposition'].lam:g}): {'PASS' if dec_ok else 'FAIL'}")
        rows.append(("decomposition", "", str(dec_ok).lower()))
        ok = dec_ok
    _write(_out_dir(args), "validate.csv", "".join(",".join(r) + "\n" for r in rows))
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# -- wigner ----------------------------------------------------------------------

_WIGNER_SCHEMA = {"grid": ("n", "x_min", "x_max"), "object": ("kind", "x0", "p0", "sigma", "edges")}
_DEFAULT_GRID = {"cptp": (64, -8.0, 8.0), "one-party": (64, -8.0, 8.0), "two-party": (8, -4.0, 4.0)}


def _read_wigner_config(path, check, args):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    for sec in cp.sections():
        if sec not in _WIGNER_SCHEMA:
            raise InputError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _WIGNER_SCHEMA[sec]:
                raise InputError(f"unknown key {key!r} in [{sec}]")
    if not cp.has_option("object", "kind"):
        raise InputError("[object] kind is required")
    n, lo, hi = _DEFAULT_GRID[check]
    try:
        if cp.has_section("grid"):
            n = int(cp["grid"].get("n", n))
            lo = float(cp["grid"].get("x_min", lo))
            hi = float(cp["grid"].get("x_max", hi))
        if args.grid_n is not None:
            n = args.grid_n
        if args.grid_range is not None:
            lo, hi = args.grid_range
        grid = phase_space.PhaseSpaceGrid(lo, hi, n)
        obj = cp["object"]
        params = {k: float(obj[k]) for k in ("x0", "p0", "sigma") if k in obj}
        if "edges" in obj:
            params["edges"] = [float(e) for e in obj["edges"].split(",") if e.strip()]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return grid, obj["kind"].strip(), params


def cmd_wigner(args) -> int:
    try:
        grid, kind, params = _read_wigner_config(args.file, args.check, args)
        if kind not in fixtures.WIGNER_KINDS:
            raise InputError(f"unknown object kind {kind!r}")
        cg = fixtures.wigner_fixture(kind, grid, **params)
    except (InputError, fixtures.FixtureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)
    want_modes = 4 if args.check == "two-party" else 2
    if cg.n_modes != want_modes:
        print(f"error: object {kind!r} has {cg.n_modes} modes, check {args.check} needs {want_modes}", file=sys.stderr)
        return EXIT_INPUT
    print(f"object {kind} on grid n={grid.n_points} x in [{grid.x_min:g}, {grid.x_max:g})")
    if args.check == "cptp":
        tol = 1e-4 if args.tol is None else args.tol
        rep = phase_space.check_cptp_chi(cg, tol)
        print(f"  missing probability   {rep.deviation:.6e}")
        print(f"  delta deviation       {rep.delta_deviation:.6e}")
        print(f"  closure deviation     {rep.closure_deviation:.6e}")
        ok = rep.passed
        z = grid.zero_index
        sl = phase_space.ChiGrid((grid,), cg.values[:, :, z, z], ("in",))
        name = "chi_output_zero.csv"
    elif args.check == "one-party":
        tol = 1e-6 if args.tol is None else args.tol
        rep = phase_space.check_one_party_structure(cg, tol)
        print(f"  off-column mass       {rep.off_column_mass:.6e}")
        print(f"  w(0)                  {rep.w0.real:.12f}{rep.w0.imag:+.3e}j")
        ok = rep.passed
        z = grid.zero_index
        sl = phase_space.ChiGrid((grid,), cg.values[:, :, z, z] / (2 * np.pi * phase_space.discrete_delta(grid)), ("in",))
        name = "one_party_profile.csv"
    else:
        tol = 1e-6 if args.tol is None else args.tol
        rep = phase_space.check_two_party_structure(cg, tol)
        print(f"  mass off eta_A2 = 0   {rep.a2_mass:.6e}")
        print(f"  mass off eta_B2 = 0   {rep.b2_mass:.6e}")
        print(f"  A-input slice check   {rep.a_input_mass:.6e}")
        print(f"  B-input slice check   {rep.b_input_mass:.6e}")
        print(f"  classification        {rep.classification}")
        ok = rep.valid
        z = [g.zero_index for g in cg.grids]
        sl = phase_space.ChiGrid(cg.grids[2:], cg.values[z[0], z[0], z[1], z[1]], cg.mode_labels[2:])
        name = "two_party_slice.csv"
    if out is not None:
        phase_space.write_grid_csv(os.path.join(out, name), sl)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# -- switch ------------------------------------------------------------------------

def _parse_scan(arg, cfg_scan):
    if arg is None:
        return cfg_scan
    param, _, vals = arg.partition("=")
    if vals:
        try:
            values = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise switch.ConfigError(f"bad scan values {vals!r}") from None
    elif cfg_scan is not None and cfg_scan[0] == param:
        values = cfg_scan[1]
    else:
        raise switch.ConfigError(f"no values for scan parameter {param!r}; use --scan {param}=v1,v2,...")
    if not values:
        raise switch.ConfigError("scan needs at least one value")
    return param.strip(), values


def cmd_switch(args) -> int:
    try:
        cfg, cfg_scan = switch.load_config(args.file)
        if args.engine is not None:
            cfg = cfg.replace(engine=args.engine)
        scan = _parse_scan(args.scan, cfg_scan)
        if scan is not None:
            switch.scan_config(cfg, scan[0], scan[1][0])
    except (switch.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _out_dir(args)
    try:
        table = switch.compute_outcomes(cfg)
        sig = switch.signaling_analysis(cfg)
        ns = switch.nonseparability_report(cfg, sig)
        scan_csv = switch.run_scan(cfg, *scan) if scan is not None else None
    except (CausticError, SingularFormError) as exc:
        print(f"error: singular configuration: {exc}", file=sys.stderr)
        return EXIT_FAIL
    summary = [
        f"config {cfg.digest()} engine={cfg.engine} hamiltonian={cfg.hamiltonian} coherent={str(cfg.coherent).lower()}",
        f"outcome cells {table.shape[0]}x{table.shape[1]}x{table.shape[2]}x2",
        f"max p_minus {float(table.p_total[..., 1].max()):.6e}",
    ]
    tol = 1e-10 if args.tol is None else args.tol
    consistent = table.consistency() <= tol
    summary.append(f"component consistency {table.consistency():.3e} ({'ok' if consistent else 'FAIL'})")
    summary += ns.lines()
    for comp in ("abc", "bac", "int"):
        summary.append(f"signaling {comp}: " + ", ".join(
            f"{d} {sig.verdict(comp, d)} ({sig.magnitudes[comp][d]:.3e})" for d in switch.DIRECTIONS))
    mism = sig.pattern_mismatches()
    summary.append("signaling pattern: " + ("as expected" if not mism else "; ".join(mism)))
    summary += [f"warning: {w}" for w in sig.warnings]
    text = "\n".join(summary) + "\n"
    print(text, end="")
    _write(out, "outcomes.csv", table.to_csv())
    _write(out, "signaling.csv", sig.to_csv())
    _write(out, "summary.txt", text)
    if scan_csv is not None:
        _write(out, "scan.csv", scan_csv)
    return EXIT_OK if consistent else EXIT_FAIL


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalw", description="Process-matrix checks and switch simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a process-matrix JSON fixture")
    v.add_argument("file")
    v.add_argument("--tol", type=float)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    w = sub.add_parser("wigner", help="phase-space checks on a grid object")
    w.add_argument("file")
    w.add_argument("--check", choices=("cptp", "one-party", "two-party"), required=True)
    w.add_argument("--tol", type=float)
    w.add_argument("--grid-n", type=int)
    w.add_argument("--grid-range", type=float, nargs=2, metavar=("X_MIN", "X_MAX"))
    w.add_argument("--out")
    w.set_defaults(func=cmd_wigner)

    s = sub.add_parser("switch", help="run a switch experiment from a key=value config")
    s.add_argument("file")
    s.add_argument("--scan", metavar="PARAM[=V1,V2,...]")
    s.add_argument("--engine", choices=("analytic", "oracle"))
    s.add_argument("--tol", type=float, help="tolerance of the component consistency check (default 1e-10)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_switch)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
