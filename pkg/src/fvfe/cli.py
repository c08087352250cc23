"""Command-line entry points: run a config, convergence suites, stability map."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cases, verification
from .driver import BoundarySpec, CaseConfig, run_case, write_csv
from .fields import SchemeConfig
from .lader1d import StabilityOrthotope, stability_map_rows, stability_scan


def parse_config_file(path):
    """Flat `key = value` config with dotted keys and # comments."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = body.split("=", 1)
            raw[key.strip()] = val.strip()
    return raw


def _as_bool(v):
    return v.lower() in ("1", "true", "on", "yes")


_PROFILES = {
    "channel-inflow": lambda p, t: np.stack(
        [
            16.0 * 0.45 * p[:, 1] * p[:, 2] * (0.41 - p[:, 1]) * (0.41 - p[:, 2]) / 0.41**4,
            np.zeros(p.shape[0]),
            np.zeros(p.shape[0]),
        ],
        axis=1,
    ),
}

_EXACT = {
    "mms1": verification.mms_laminar,
    "mms2": verification.mms_turbulent,
    "gaussian": verification.gaussian_sphere,
}


def case_from_config(raw):
    """Build a CaseConfig from the flat key/value mapping."""
    exact = None
    if "exact" in raw:
        exact = _EXACT[raw["exact"]]()

    scheme = SchemeConfig(
        rho=float(raw.get("physics.rho", exact.rho if exact else 1.0)),
        mu=float(raw.get("physics.mu", exact.mu if exact else 1e-2)),
        diffusivity=float(raw.get("physics.diffusivity", exact.diffusivity if exact else 0.0)),
        cfl=float(raw.get("cfl", 1.0)),
        scheme=raw.get("scheme", "lader"),
        lader_flux_diffusion=_as_bool(raw.get("lader_flux_diffusion", "on")),
        alpha_rs_mode=raw.get("alpha_rs", "decoupled"),
        turbulence=_as_bool(raw.get("turbulence", "on" if (exact and exact.turbulence) else "off")),
        species=_as_bool(raw.get("species", "on" if (exact and exact.species) else "off")),
        solver_tol=float(raw.get("solver_tol", 1e-10)),
    )

    mesh_n = None
    if "mesh.n" in raw:
        mesh_n = int(raw["mesh.n"])
    elif "mesh.nx" in raw:
        mesh_n = (int(raw["mesh.nx"]), int(raw["mesh.ny"]), int(raw["mesh.nz"]))
    extents = ((0.0, 1.0),) * 3
    if exact is not None:
        extents = exact.domain
    if "mesh.extents" in raw:
        v = [float(x) for x in raw["mesh.extents"].split()]
        extents = ((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))

    bc = {}
    for key, val in raw.items():
        if key.startswith("bc.") and key.count(".") == 1:
            tag = int(key.split(".")[1])
            kind = val
            spec = BoundarySpec(kind) if kind != "exact-mms" else "exact-mms"
            vkey, pkey = f"bc.{tag}.value", f"bc.{tag}.profile"
            if kind != "exact-mms":
                if pkey in raw:
                    spec.momentum = _PROFILES[raw[pkey]]
                elif vkey in raw:
                    vec = np.array([float(x) for x in raw[vkey].split()])
                    spec.momentum = lambda p, t, v=vec: np.tile(v, (p.shape[0], 1))
            bc[tag] = spec

    vel = tuple(float(x) for x in raw.get("init.velocity", "0 0 0").split())
    return CaseConfig(
        name=raw.get("case", "case"),
        mesh_n=mesh_n,
        mesh_extents=extents,
        mesh_file=raw.get("mesh.file"),
        scheme=scheme,
        t_end=float(raw["t_end"]) if "t_end" in raw else None,
        max_steps=int(raw["max_steps"]) if "max_steps" in raw else None,
        bc=bc,
        exact=exact,
        initial_velocity=vel,
        output_dir=raw.get("output.dir"),
        output_every=int(raw.get("output.every", 100)),
        steady_tol=float(raw["steady_tol"]) if "steady_tol" in raw else None,
    )


def cmd_run(args):
    case = case_from_config(parse_config_file(args.config))
    record = run_case(case)
    last = record.residuals[-1] if record.residuals else float("nan")
    print(
        f"{case.name}: {record.steps} steps to t={record.state.time:.6g}, "
        f"steady={record.steady}, last residual {last:.3e}, wall {record.wall_time:.1f}s"
    )
    return 0


def cmd_convergence(args):
    schemes = args.schemes.split(",") if args.schemes else None

    def progress(scheme, mesh, steps, t):
        if steps % 200 == 0:
            print(f"  [{args.suite}/{scheme}] mesh {mesh}: step {steps}, t={t:.4f}", flush=True)

    reports = cases.convergence_suite(args.suite, schemes=schemes, progress=progress if args.verbose else None)
    for scheme, rep in reports.items():
        print(f"== {args.suite} / {scheme}")
        orders = rep.orders()
        for var, errs in rep.errors.items():
            o = ", ".join(f"{x:.2f}" for x in orders[var])
            e = ", ".join(f"{x:.3e}" for x in errs)
            print(f"  {var}: E = [{e}]  orders = [{o}]")
        if args.output:
            path = args.output.replace(".csv", f"_{scheme}.csv") if len(reports) > 1 else args.output
            write_csv(rep.rows(), path)
            print(f"  wrote {path}")
    return 0


def cmd_stability_map(args):
    box = StabilityOrthotope(args.cmax, args.dmax, args.rmin)
    rows = stability_map_rows(box, res=args.res, n_theta=args.ntheta)
    out = args.output or "stability_map.csv"
    write_csv(rows, out, header=("c", "d", "r", "max_abs_A"))
    mx, sample = stability_scan(box, res=args.res, n_theta=args.ntheta)
    print(f"max |A| over the box: {mx:.12f} at (theta, c, d, r) = {sample}")
    print(f"wrote {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="solver", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a case described by a key=value config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="run a manufactured-solution convergence suite")
    p_conv.add_argument("suite", choices=["mms1", "mms2", "gaussian"])
    p_conv.add_argument("--schemes", help="comma-separated subset of order1,cvc-orth,cvc-g,lader")
    p_conv.add_argument("--output", help="CSV output path")
    p_conv.add_argument("--verbose", action="store_true")
    p_conv.set_defaults(func=cmd_convergence)

    p_map = sub.add_parser("stability-map", help="scan |A| of the 1D scheme over an orthotope")
    p_map.add_argument("--cmax", type=float, default=0.3)
    p_map.add_argument("--dmax", type=float, default=0.2)
    p_map.add_argument("--rmin", type=float, default=-0.5)
    p_map.add_argument("--res", type=int, default=21)
    p_map.add_argument("--ntheta", type=int, default=256)
    p_map.add_argument("--output")
    p_map.set_defaults(func=cmd_stability_map)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
