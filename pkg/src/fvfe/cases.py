"""Prepackaged verification cases: manufactured-solution convergence suites,
the rotating Gaussian sphere, and the coarse cylinder benchmark."""

from __future__ import annotations

import numpy as np

from . import verification as V
from .cylinder import cylinder_channel_mesh
from .driver import BoundarySpec, CaseConfig, RunRecord, run_case
from .fields import SchemeConfig, pressure_at_nodes
from .verification import ErrorAccumulator, ErrorReport

MMS_MESHES = [4, 8, 16]
GAUSSIAN_MESHES = [(18, 18, 6), (21, 21, 7), (30, 30, 10)]
GAUSSIAN_H = [0.1, 1.8 / 21.0, 0.06]


def _exact_bc_table(tags=range(1, 7)):
    return {t: "exact-mms" for t in tags}


def run_verification_case(sol, mesh_n, scheme_cfg, t_end, extents=None, progress=None):
    """Run one mesh of a manufactured case, accumulating space-time errors.

    Returns a dict variable -> l2(L2) error over the run.  The computed
    pressure is compared after aligning its volume-weighted mean with the
    exact one (the increments are mean-free, so the discrete pressure carries
    an arbitrary constant).
    """
    case = CaseConfig(
        name=sol.name,
        mesh_n=mesh_n,
        mesh_extents=extents or sol.domain,
        scheme=scheme_cfg,
        t_end=t_end,
        bc=_exact_bc_table(),
        exact=sol,
    )
    acc = {}

    def observer(state, record):
        if "acc" not in acc:
            acc["acc"] = ErrorAccumulator(record.dual)
            acc["dual"] = record.dual
        if record.steps == 0:
            return
        dual = acc["dual"]
        a = acc["acc"]
        dt = record.dts[-1]
        t = state.time
        pts = dual.nodes
        rho = sol.rho
        w = dual.cell_volume
        pi_h = pressure_at_nodes(state.pi, dual)
        pi_ex = sol.pi(pts, t)
        shift = float((w * (pi_ex - pi_h)).sum() / w.sum())
        a.add(dt, "pi", pi_h + shift, pi_ex)
        a.add(dt, "w_u", state.w_u, rho * sol.u(pts, t))
        if scheme_cfg.turbulence:
            a.add(dt, "w_k", state.w_k, rho * sol.k(pts, t))
            a.add(dt, "w_eps", state.w_eps, rho * sol.eps(pts, t))
        if scheme_cfg.species:
            a.add(dt, "w_y", state.w_y, rho * sol.y(pts, t))
        if progress is not None:
            progress(record.steps, t)

    run_case(case, observer=observer)
    return acc["acc"].errors()


def _scheme_config(scheme, sol, cfl):
    return SchemeConfig(
        scheme=scheme,
        mu=sol.mu,
        diffusivity=sol.diffusivity,
        cfl=cfl,
        rho=sol.rho,
        turbulence=sol.turbulence,
        species=sol.species,
    )


def convergence_suite(suite, schemes=None, meshes=None, progress=None):
    """Run a convergence study; returns {scheme: ErrorReport}.

    suite: "mms1" (laminar, CFL 1), "mms2" (turbulent + species, CFL 10) or
    "gaussian" (species transport, mu = D = 1e-2, one revolution; CFL 0.5 for
    lader and 5 for the CVC variants, following the published runs).
    """
    if suite == "mms1":
        sol = V.mms_laminar()
        schemes = schemes or ["order1", "cvc-orth", "cvc-g", "lader"]
        meshes = meshes or MMS_MESHES
        hs = [1.0 / n for n in meshes]
        t_end, cfl_of = 1.0, lambda s: 1.0
        extents = None
    elif suite == "mms2":
        sol = V.mms_turbulent()
        schemes = schemes or ["order1", "cvc-orth", "cvc-g", "lader"]
        meshes = meshes or MMS_MESHES
        hs = [1.0 / n for n in meshes]
        t_end, cfl_of = 1.0, lambda s: 10.0
        extents = None
    elif suite == "gaussian":
        sol = V.gaussian_sphere()
        schemes = schemes or ["cvc-g", "lader"]
        meshes = meshes or GAUSSIAN_MESHES
        hs = GAUSSIAN_H[: len(meshes)]
        t_end = 2.0 * np.pi
        cfl_of = lambda s: 0.5 if s == "lader" else 5.0
        extents = sol.domain
    else:
        raise ValueError(f"unknown suite {suite!r}")

    reports = {}
    for scheme in schemes:
        per_var = {}
        for mi, mesh_n in enumerate(meshes):
            cfg = _scheme_config(scheme, sol, cfl_of(scheme))
            cb = None
            if progress is not None:
                cb = lambda steps, t, m=mesh_n, s=scheme: progress(s, m, steps, t)
            errs = run_verification_case(sol, mesh_n, cfg, t_end, extents=extents, progress=cb)
            for var, e in errs.items():
                per_var.setdefault(var, []).append(e)
        reports[scheme] = ErrorReport(mesh_sizes=list(hs), errors=per_var)
    return reports


def cylinder_case(scheme="order1", cfl=2.0, steady_tol=1e-3, max_steps=80000, mesh_path=None, nz=5, ramp_time=1.0):
    """Coarse flow-around-a-cylinder smoke case (laminar, Re = 20).

    Tags: 1 inlet, 2 outlet, 3 channel walls, 4 cylinder surface.  The inlet
    carries the quartic channel profile, ramped from rest over `ramp_time` to
    sidestep the impulsive-start pressure transient; the run stops on the
    relaxed steady criterion (1/dt) ||W^k - W^{k-1}||_inf <= steady_tol.
    """
    H = 0.41
    Ubar = 0.45

    def inflow(p, t):
        y, z = p[:, 1], p[:, 2]
        ramp = min(t / ramp_time, 1.0) if ramp_time > 0 else 1.0
        ux = ramp * 16.0 * Ubar * y * z * (H - y) * (H - z) / H**4
        return np.stack([ux, np.zeros_like(ux), np.zeros_like(ux)], axis=1)

    zero = lambda p, t: np.zeros((p.shape[0], 3))
    bc = {
        1: BoundarySpec("dirichlet-viscous", momentum=inflow),
        2: BoundarySpec("neumann"),
        3: BoundarySpec("dirichlet-viscous", momentum=zero),
        4: BoundarySpec("dirichlet-viscous", momentum=zero),
    }
    if mesh_path is None:
        import os
        import tempfile

        from .mesh import write_mesh

        fe = cylinder_channel_mesh(nz=nz)
        mesh_path = os.path.join(tempfile.mkdtemp(prefix="fvfe_cyl_"), "cylinder.msh")
        write_mesh(fe, mesh_path)
    cfg = SchemeConfig(scheme=scheme, mu=1e-3, diffusivity=0.0, cfl=cfl, turbulence=False, species=False)
    return CaseConfig(
        name="cylinder",
        mesh_file=mesh_path,
        scheme=cfg,
        t_end=None,
        max_steps=max_steps,
        bc=bc,
        steady_tol=steady_tol,
    )


def cylinder_coefficients(record):
    """Drag/lift coefficients and front-back pressure difference of a run."""
    st, dual = record.state, record.dual
    return V.drag_lift(
        dual,
        st.pi,
        st.w_u,
        rho=1.0,
        mu=1e-3,
        surface_tag=4,
        p1=(0.45, 0.2, 0.205),
        p2=(0.55, 0.2, 0.205),
    )
