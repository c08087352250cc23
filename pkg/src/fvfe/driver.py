"""Time loop orchestration: boundary conditions, step control, output.

One `advance` applies, in order: the explicit transport-diffusion stage for
all conservative variables, the FE pressure-correction solve, the momentum
update by the correction gradient, the turbulent-viscosity refresh, the
implicit-production / semi-implicit-dissipation turbulence update with the
corrected velocities, and the pointwise species sources.
"""

from __future__ import annotations

import os
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import closure, projection, schemes
from .errors import ZeroDynamicsError
from .fields import FlowState, SchemeConfig, momentum_to_tets, pressure_at_nodes
from .mesh import build_dual_mesh, generate_cube_mesh, read_mesh

BC_KINDS = ("dirichlet-viscous", "dirichlet-inviscid", "neumann", "exact-mms")


@dataclass
class CaseSources:
    """Source callables of the conservative equations, (pts, t) -> array."""

    f_u: object = None
    f_k: object = None
    f_eps: object = None
    f_y: object = None

    @classmethod
    def from_exact(cls, sol):
        return cls(f_u=sol.f_u, f_k=sol.f_k, f_eps=sol.f_eps, f_y=sol.f_y)


@dataclass
class BoundarySpec:
    """kind plus the imposed conservative values.

    momentum: callable (pts, t) -> (n, 3) giving rho*u to impose; scalars maps
    "k"/"eps"/"y" to callables for the matching conservative fields.
    """

    kind: str
    momentum: object = None
    scalars: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")


class BoundaryTable:
    """Per-node boundary actions resolved from the tag table."""

    def __init__(self, dual, specs, exact=None, rho=1.0):
        self.dual = dual
        self.rho = rho
        tags = set(int(t) for t in np.unique(dual.node_tag[dual.node_tag >= 0]))
        missing = tags - set(specs)
        if missing:
            raise ValueError(f"mesh boundary tags {sorted(missing)} have no boundary condition")
        self.specs = {}
        for tag, spec in specs.items():
            if isinstance(spec, str):
                spec = BoundarySpec(kind=spec)
            if spec.kind == "exact-mms":
                if exact is None:
                    raise ValueError("exact-mms boundary requires an exact solution")
                scalars = {}
                if exact.k is not None:
                    scalars["k"] = lambda p, t, e=exact: e.rho * e.k(p, t)
                    scalars["eps"] = lambda p, t, e=exact: e.rho * e.eps(p, t)
                if exact.y is not None:
                    scalars["y"] = lambda p, t, e=exact: e.rho * e.y(p, t)
                spec = BoundarySpec(
                    kind="dirichlet-viscous",
                    momentum=lambda p, t, e=exact: e.rho * e.u(p, t),
                    scalars=scalars,
                )
            self.specs[int(tag)] = spec

        self._groups = {}
        for tag in self.specs:
            nodes = np.flatnonzero(dual.node_tag == tag)
            patches = np.flatnonzero(dual.bpatch_tag == tag)
            self._groups[tag] = (nodes, patches)

        # open-boundary treatment: pin delta = 0 on outflow vertices and
        # upwind the convective patch flux there under momentary backflow
        fixed = np.zeros(dual.fe.n_vertices, dtype=bool)
        open_patches = np.zeros(dual.bpatch_node.size, dtype=bool)
        for tag, spec in self.specs.items():
            if spec.kind == "neumann":
                _, patches = self._groups[tag]
                fixed[dual.face_vertices[dual.bpatch_node[patches]].ravel()] = True
                open_patches[patches] = True
        self.pressure_fixed = fixed if np.any(fixed) else None
        self.open_patches = open_patches if np.any(open_patches) else None

    def apply_momentum(self, w_u, t):
        """Overwrite Dirichlet momentum values (full vector or normal component)."""
        for tag, spec in self.specs.items():
            nodes, patches = self._groups[tag]
            if spec.kind == "neumann" or nodes.size == 0:
                continue
            value = (
                np.asarray(spec.momentum(self.dual.nodes[nodes], t), dtype=float)
                if spec.momentum is not None
                else np.zeros((nodes.size, 3))
            )
            if spec.kind == "dirichlet-viscous":
                w_u[nodes] = value
            else:  # dirichlet-inviscid: set only the normal component
                normals = self.dual.bpatch_normal[patches]
                nhat = normals / np.linalg.norm(normals, axis=1)[:, None]
                node_of = self.dual.bpatch_node[patches]
                order = np.argsort(node_of)
                nhat = nhat[order][np.searchsorted(node_of[order], nodes)]
                wn = np.einsum("ij,ij->i", w_u[nodes], nhat)
                gn = np.einsum("ij,ij->i", value, nhat)
                w_u[nodes] += (gn - wn)[:, None] * nhat

    def apply_scalar(self, arr, name, t):
        for tag, spec in self.specs.items():
            fun = spec.scalars.get(name)
            nodes, _ = self._groups[tag]
            if fun is None or spec.kind == "neumann" or nodes.size == 0:
                continue
            val = fun(self.dual.nodes[nodes], t)
            arr[nodes] = val.reshape(arr[nodes].shape)

    def patch_normal_flux(self, w_u_tilde, t):
        """Prescribed normal momentum flux G per boundary patch for the projection."""
        dual = self.dual
        nb = dual.bpatch_node.size
        G = np.zeros(nb)
        areas = np.linalg.norm(dual.bpatch_normal, axis=1)
        nhat = dual.bpatch_normal / areas[:, None]
        for tag, spec in self.specs.items():
            _, patches = self._groups[tag]
            if patches.size == 0:
                continue
            nodes = dual.bpatch_node[patches]
            if spec.kind == "neumann" or spec.momentum is None:
                G[patches] = np.einsum("ij,ij->i", w_u_tilde[nodes], nhat[patches])
            else:
                val = spec.momentum(dual.nodes[nodes], t)
                G[patches] = np.einsum("ij,ij->i", val, nhat[patches])
        return G


@dataclass
class CaseConfig:
    """Everything needed to run a case from the generic driver."""

    name: str = "case"
    mesh_n: object = None
    mesh_extents: tuple = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    mesh_file: str = None
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    t_end: float = None
    max_steps: int = None
    bc: dict = field(default_factory=dict)
    exact: object = None  # ExactSolution: initializes, feeds exact-mms BCs + sources
    initial_velocity: object = (0.0, 0.0, 0.0)  # constant triple or callable (pts) -> (n, 3)
    output_dir: str = None
    output_every: int = 100
    steady_tol: float = None

    def __post_init__(self):
        if (self.mesh_n is None) == (self.mesh_file is None):
            raise ValueError("exactly one of mesh_n / mesh_file must be given")
        if self.t_end is None and self.max_steps is None and self.steady_tol is None:
            raise ValueError("no stopping criterion (t_end, max_steps or steady_tol)")


@dataclass
class RunRecord:
    """Per-step history of a run plus the final state."""

    dts: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    steps: int = 0
    steady: bool = False
    state: FlowState = None
    dual: object = None


def compute_time_step(state, dual, config):
    """CFL L^2 / (2 |U| L + max{mu + mu_t, rho D + mu_t / Sc_t}), min over cells."""
    rho = config.rho
    speed = np.linalg.norm(state.w_u / rho, axis=1)
    mu_t = state.mu_t if (config.turbulence and state.mu_t is not None) else 0.0
    visc = config.mu + mu_t
    if config.species:
        visc = np.maximum(visc, config.rho * config.diffusivity + mu_t / config.constants.sc_t)
    L = dual.char_length
    denom = 2.0 * speed * L + visc
    valid = denom > 1e-300
    if not np.any(valid):
        raise ZeroDynamicsError("time-step denominator vanished at every cell")
    dts = config.cfl * L[valid] ** 2 / denom[valid]
    return float(dts.min())


def initial_state(dual, config, exact=None, velocity=(0.0, 0.0, 0.0)):
    """Exact fields at t=0 for verification cases, uniform fields otherwise."""
    state = FlowState.zeros(dual, config)
    rho = config.rho
    if exact is not None:
        pts = dual.nodes
        state.w_u = rho * exact.u(pts, 0.0)
        state.pi = exact.pi(dual.fe.vertices, 0.0)
        if config.turbulence:
            state.w_k = rho * exact.k(pts, 0.0)
            state.w_eps = rho * exact.eps(pts, 0.0)
        if config.species:
            state.w_y = rho * exact.y(pts, 0.0)
    elif callable(velocity):
        state.w_u[:] = rho * np.asarray(velocity(dual.nodes), dtype=float)
    else:
        state.w_u[:] = rho * np.asarray(velocity, dtype=float)
    if config.turbulence:
        state.mu_t = closure.turbulent_viscosity(
            state.w_k, state.w_eps, rho, config.constants, config.eps_floor
        )
    return state


def advance(state, dual, fe, config, bcs=None, sources=None, dt=None, workspace=None):
    """One full step (transport, projection, post-projection); mutates `state`.

    Returns (dt, cg_iterations).  `workspace` caches the stiffness matrix
    across steps.
    """
    if dt is None:
        dt = compute_time_step(state, dual, config)
    sources = sources or CaseSources()
    t_new = state.time + dt
    rho = config.rho

    if workspace is not None and "stiffness" in workspace:
        stiffness = workspace["stiffness"]
    else:
        stiffness = projection.assemble_stiffness(dual)
        if workspace is not None:
            workspace["stiffness"] = stiffness

    w_old_k = state.w_k.copy() if config.turbulence else None
    w_old_eps = state.w_eps.copy() if config.turbulence else None

    f_u_arr = sources.f_u(dual.nodes, state.time) if sources.f_u else None
    tilde = schemes.transport_diffusion_step(
        state, dual, config, dt, f_u=f_u_arr,
        open_patches=bcs.open_patches if bcs is not None else None,
    )

    if bcs is not None:
        bcs.apply_momentum(tilde["w_u"], t_new)
    w_tet = momentum_to_tets(tilde["w_u"], dual)
    G = bcs.patch_normal_flux(tilde["w_u"], t_new) if bcs is not None else None
    system = projection.assemble_pressure_system(dual, w_tet, dt, boundary_flux=G, stiffness=stiffness)
    x0 = workspace.get("delta_prev") if workspace is not None else None
    fixed = bcs.pressure_fixed if bcs is not None else None
    delta, iters = projection.solve_pressure(
        system, config.solver_tol, config.solver_max_iter, x0=x0, fixed=fixed
    )
    if workspace is not None:
        workspace["delta_prev"] = delta
    state.pi = state.pi + delta
    state.w_u = projection.post_projection_momentum(tilde["w_u"], delta, dual, dt)
    if bcs is not None:
        bcs.apply_momentum(state.w_u, t_new)

    if config.turbulence:
        state.mu_t = closure.turbulent_viscosity(
            tilde["w_k"], tilde["w_eps"], rho, config.constants, config.eps_floor
        )
        grad_u_node = dual.node_average_from_tets(dual.element_gradients(state.w_u / rho))
        g_k = closure.production_gk(grad_u_node, state.mu_t)
        f_k_arr = sources.f_k(dual.nodes, state.time) if sources.f_k else 0.0
        f_eps_arr = sources.f_eps(dual.nodes, state.time) if sources.f_eps else 0.0
        state.w_k, state.w_eps = closure.reaction_update_k_eps(
            tilde["w_k"],
            tilde["w_eps"],
            w_old_k,
            w_old_eps,
            g_k,
            f_k_arr,
            f_eps_arr,
            dt,
            config.constants,
            config.k_floor,
            config.eps_floor,
        )
        if bcs is not None:
            bcs.apply_scalar(state.w_k, "k", t_new)
            bcs.apply_scalar(state.w_eps, "eps", t_new)
        np.maximum(state.w_k, config.k_floor, out=state.w_k)
        np.maximum(state.w_eps, config.eps_floor, out=state.w_eps)

    if config.species:
        f_y_arr = sources.f_y(dual.nodes, state.time) if sources.f_y else 0.0
        state.w_y = closure.species_source_update(tilde["w_y"], f_y_arr, dt)
        if bcs is not None:
            bcs.apply_scalar(state.w_y, "y", t_new)

    state.time = t_new
    state.step_index += 1
    return dt, iters


def build_case_mesh(case):
    if case.mesh_file is not None:
        fe = read_mesh(case.mesh_file)
    else:
        fe = generate_cube_mesh(case.mesh_n, case.mesh_extents)
    return fe, build_dual_mesh(fe)


def run_case(case, observer=None):
    """Advance until t_end, max_steps or the steady criterion; returns a RunRecord.

    observer(state, record) is called after each step (and once at start).
    """
    fe, dual = build_case_mesh(case)
    config = case.scheme
    state = initial_state(dual, config, exact=case.exact, velocity=case.initial_velocity)
    bcs = BoundaryTable(dual, case.bc, exact=case.exact, rho=config.rho)
    sources = CaseSources.from_exact(case.exact) if case.exact is not None else CaseSources()
    workspace = {}
    record = RunRecord(state=state, dual=dual)

    out_dir = case.output_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_vtk(state, dual, os.path.join(out_dir, f"{case.name}_000000.vtk"))
    if observer is not None:
        observer(state, record)

    t0 = _time.perf_counter()
    while True:
        if case.max_steps is not None and record.steps >= case.max_steps:
            break
        if case.t_end is not None and state.time >= case.t_end - 1e-14:
            break
        dt = compute_time_step(state, dual, config)
        if case.t_end is not None:
            dt = min(dt, case.t_end - state.time)
        w_prev = state.w_u.copy()
        dt, _ = advance(state, dual, fe, config, bcs=bcs, sources=sources, dt=dt, workspace=workspace)
        resid = float(np.abs(state.w_u - w_prev).max() / dt)
        record.dts.append(dt)
        record.residuals.append(resid)
        record.steps += 1
        if observer is not None:
            observer(state, record)
        if out_dir and record.steps % case.output_every == 0:
            write_vtk(state, dual, os.path.join(out_dir, f"{case.name}_{record.steps:06d}.vtk"))
        if case.steady_tol is not None and resid <= case.steady_tol:
            record.steady = True
            break
    record.wall_time = _time.perf_counter() - t0
    if out_dir:
        write_vtk(state, dual, os.path.join(out_dir, f"{case.name}_final.vtk"))
    return record


def write_vtk(state, dual, path):
    """Legacy-ASCII VTK: dual-node cloud with point data, plus the FE mesh
    (vertex pressure) in a sibling `*_fe.vtk` file."""
    nn = dual.n_nodes
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("dual-node fields\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nn} double\n")
        for p in dual.nodes:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        fh.write(f"CELLS {nn} {2 * nn}\n")
        for i in range(nn):
            fh.write(f"1 {i}\n")
        fh.write(f"CELL_TYPES {nn}\n")
        fh.write("1\n" * nn)
        fh.write(f"POINT_DATA {nn}\n")
        fh.write("VECTORS velocity double\n")
        u = state.w_u
        for v in u:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        fields = [("pressure", pressure_at_nodes(state.pi, dual))]
        if state.w_k is not None:
            fields += [("k", state.w_k), ("eps", state.w_eps), ("mu_t", state.mu_t)]
        if state.w_y is not None:
            fields.append(("y", state.w_y[:, 0]))
        for name, arr in fields:
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in arr:
                fh.write(f"{v:.9g}\n")

    fe = dual.fe
    fe_path = path[:-4] + "_fe.vtk" if path.endswith(".vtk") else path + "_fe.vtk"
    with open(fe_path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("vertex pressure\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {fe.n_vertices} double\n")
        for p in fe.vertices:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        fh.write(f"CELLS {fe.n_tets} {5 * fe.n_tets}\n")
        for t in fe.tets:
            fh.write(f"4 {t[0]} {t[1]} {t[2]} {t[3]}\n")
        fh.write(f"CELL_TYPES {fe.n_tets}\n")
        fh.write("10\n" * fe.n_tets)
        fh.write(f"POINT_DATA {fe.n_vertices}\n")
        fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for v in state.pi:
            fh.write(f"{v:.9g}\n")


def write_csv(rows, path, header=("mesh", "variable", "error", "order")):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
