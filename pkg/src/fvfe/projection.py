"""P1 finite-element pressure correction and the divergence-restoring update.

Weak problem: find delta with zero mean such that

    (grad delta, grad z) = (1/dt) [ (W~, grad z) - <G, z>_boundary ]   for all z,

where W~ is the intermediate momentum redefined constant per element and G the
prescribed normal momentum flux on the boundary.  The stiffness matrix is the
pure-Neumann Laplacian (symmetric positive semidefinite, kernel = constants);
compatibility and uniqueness are handled by deflating the constant mode inside
the conjugate-gradient loop rather than pinning a vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverConvergenceError


@dataclass
class PressureSystem:
    """Sparse SPD-on-the-quotient stiffness with its current right-hand side."""

    stiffness: sp.csr_matrix
    rhs: np.ndarray
    vertex_volume: np.ndarray  # lumped volumes, used to weight the mean constraint

    def deflate(self, v):
        """Remove the kernel component (the constant vector) from v."""
        return v - v.mean()

    def zero_mean(self, v):
        """Shift v to zero volume-weighted mean (the int delta = 0 constraint)."""
        w = self.vertex_volume
        return v - (w @ v) / w.sum()


def assemble_stiffness(dual):
    """Pure-Neumann P1 stiffness matrix over the FE vertices (assembled once)."""
    fe = dual.fe
    vols = fe.signed_volumes()
    gw = dual.vertex_grad_weights  # (nt, 4, 3)
    local = np.einsum("tad,tbd->tab", gw, gw) * vols[:, None, None]
    rows = np.repeat(fe.tets, 4, axis=1).ravel()
    cols = np.tile(fe.tets, (1, 4)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(fe.n_vertices, fe.n_vertices))
    return A.tocsr()


def vertex_volumes(fe):
    vols = fe.signed_volumes()
    out = np.zeros(fe.n_vertices)
    np.add.at(out, fe.tets.ravel(), np.repeat(vols / 4.0, 4))
    return out


def _weak_rhs(dual, w_tet, dt, boundary_flux):
    """(1/dt) [ sum_T |T| W_T . grad(phi_a) - sum_btri area/3 G(V_a) ].

    w_tet: per-element momentum (nt, 3).  boundary_flux: per boundary patch,
    the prescribed normal momentum flux G = W.n (unit outward normal), or
    None for zero.
    """
    fe = dual.fe
    vols = fe.signed_volumes()
    contrib = np.einsum("td,tad->ta", w_tet, dual.vertex_grad_weights) * vols[:, None]
    rhs = np.zeros(fe.n_vertices)
    np.add.at(rhs, fe.tets.ravel(), contrib.ravel())
    if boundary_flux is not None:
        tris = dual.face_vertices[dual.bpatch_node]
        areas = np.linalg.norm(dual.bpatch_normal, axis=1)
        np.add.at(rhs, tris.ravel(), -np.repeat(boundary_flux * areas / 3.0, 3))
    return rhs / dt


def assemble_pressure_system(dual, w_tet, dt, boundary_flux=None, stiffness=None):
    """Build the pressure-correction system for the current intermediate momentum."""
    A = stiffness if stiffness is not None else assemble_stiffness(dual)
    rhs = _weak_rhs(dual, w_tet, dt, boundary_flux)
    return PressureSystem(stiffness=A, rhs=rhs, vertex_volume=vertex_volumes(dual.fe))


def solve_pressure(system, tol=1e-10, max_iter=20000, x0=None, fixed=None):
    """Jacobi-preconditioned CG with constant-mode deflation.

    Returns (delta, iterations); failure raises SolverConvergenceError
    carrying the residual history.  x0 warm starts the iteration.

    Pure-Neumann problems (fixed is None) are solved on the quotient by
    constants and returned with zero volume-weighted mean.  When `fixed`
    marks outflow vertices, the correction is pinned to zero there instead
    (the standard open-boundary treatment) and no deflation is applied.
    """
    if fixed is not None and np.any(fixed):
        return _solve_pinned(system, np.asarray(fixed, dtype=bool), tol, max_iter, x0)
    A = system.stiffness
    b = system.deflate(system.rhs)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    diag = A.diagonal()
    inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)

    if x0 is not None:
        x = system.deflate(np.asarray(x0, dtype=float))
        r = b - A @ x
    else:
        x = np.zeros_like(b)
        r = b.copy()
    if np.linalg.norm(r) / bnorm <= tol:
        return system.zero_mean(x), 0
    z = system.deflate(inv_diag * r)
    p = z.copy()
    rz = r @ z
    history = [float(np.linalg.norm(r) / bnorm)]
    for it in range(1, max_iter + 1):
        Ap = A @ p
        denom = p @ Ap
        if denom <= 0.0:
            break
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.linalg.norm(r) / bnorm)
        history.append(rel)
        if rel <= tol:
            return system.zero_mean(x), it
        z = system.deflate(inv_diag * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverConvergenceError(
        f"pressure CG stalled at relative residual {history[-1]:.3e} after {len(history) - 1} iterations",
        residual_history=history,
    )


def _solve_pinned(system, fixed, tol, max_iter, x0):
    """CG on the submatrix with delta = 0 on the fixed vertices."""
    A = system.stiffness
    free = ~fixed
    Aff = A[free][:, free].tocsr()
    b = system.rhs[free]
    bnorm = np.linalg.norm(b)
    out = np.zeros(system.rhs.shape[0])
    if bnorm == 0.0:
        return out, 0
    diag = Aff.diagonal()
    inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float)[free]
    r = b - Aff @ x if x0 is not None else b.copy()
    if np.linalg.norm(r) / bnorm <= tol:
        out[free] = x
        return out, 0
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    history = [float(np.linalg.norm(r) / bnorm)]
    for it in range(1, max_iter + 1):
        Ap = Aff @ p
        denom = p @ Ap
        if denom <= 0.0:
            break
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.linalg.norm(r) / bnorm)
        history.append(rel)
        if rel <= tol:
            out[free] = x
            return out, it
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverConvergenceError(
        f"pinned pressure CG stalled at relative residual {history[-1]:.3e}",
        residual_history=history,
    )


def delta_gradient_at_nodes(dual, delta):
    """grad(delta) per dual node: mean of the P1 gradients on adjacent elements."""
    grads = dual.vertex_field_gradients(delta)  # (nt, 3)
    return dual.node_average_from_tets(grads)


def post_projection_momentum(w_tilde, delta, dual, dt):
    """W^{n+1} = W~ - dt grad(delta) at the dual nodes.

    The sign follows the splitting equation (the divergence-reducing choice).
    """
    return w_tilde - dt * delta_gradient_at_nodes(dual, delta)


def weak_divergence_residual(dual, w_tet, dt, boundary_flux=None):
    """Vector of the weak-divergence functional for an element-constant field.

    r_a = (1/dt)[ int W . grad(phi_a) - int_bnd G phi_a ], constant mode
    removed; the post-projection element field W~_T - dt (grad delta)_T drives
    this down to solver scale.
    """
    rhs = _weak_rhs(dual, w_tet, dt, boundary_flux)
    w = vertex_volumes(dual.fe)
    return rhs - (w @ rhs) / w.sum()
