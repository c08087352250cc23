"""Transport-diffusion stage: numerical fluxes and the intermediate update.

Three convective schemes share the Rusanov skeleton
    phi = 1/2 (Z(W_i, eta) + Z(W_j, eta)) - 1/2 alpha_RS (W_R - W_L)
with Z(W, eta) = (u . eta) W and eta the area-weighted interface normal:

  order1   W_L, W_R are the node states.
  cvc-*    minmod-limited upwind slopes sharpen only the dissipation states.
  lader    ENO gradients reconstruct both face states, which are then evolved
           half a step in time before entering the full Rusanov formula.

Viscous fluxes use the Galerkin gradient on the element containing the
interface ("cvc-g", "order1", "lader" on evolved fields) or a two-point
orthogonal approximation ("cvc-orth").  The pressure face term integrates the
P1 vertex pressure with the 5/12-5/12-1/12-1/12 quadrature that follows from
sampling the interface triangle corners (two face vertices and the element
barycenter).

Everything here is expressed per interface and is exactly antisymmetric under
(i <-> j, eta -> -eta); accumulation into cells happens once per interface, so
conservation is bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DivergenceDetectedError

PRESSURE_W_EDGE = 5.0 / 12.0
PRESSURE_W_FAR = 1.0 / 12.0

_LADER_ADVECTIVE_CK = "normal"  # experiment switch, resolved below


# ---------------------------------------------------------------------------
# elementary flux operations (scalar/batched; the time stepper re-derives the
# same arithmetic in vectorized form)
# ---------------------------------------------------------------------------

def rusanov_alpha(U_i, U_j, eta, mode="decoupled", equation="momentum"):
    """Upwind coefficient max over the two advection speeds through eta.

    Momentum always uses the doubled coefficient; the remaining equations use
    the plain maximum unless the coupled mode is requested.
    """
    un_i = np.abs(np.dot(np.asarray(U_i), np.asarray(eta)))
    un_j = np.abs(np.dot(np.asarray(U_j), np.asarray(eta)))
    base = max(un_i, un_j)
    if equation == "momentum" or mode == "coupled":
        return 2.0 * base
    return base


def rusanov_flux(W_i, W_j, U_i, U_j, eta, alpha):
    """phi = 1/2 (Z_i + Z_j) - alpha/2 (W_j - W_i), Z = (U.eta) W."""
    W_i, W_j = np.asarray(W_i, dtype=float), np.asarray(W_j, dtype=float)
    un_i = np.dot(np.asarray(U_i), np.asarray(eta))
    un_j = np.dot(np.asarray(U_j), np.asarray(eta))
    return 0.5 * (un_i * W_i + un_j * W_j) - 0.5 * alpha * (W_j - W_i)


def minmod(a, b):
    """Componentwise minmod: zero on sign disagreement, else the smaller magnitude."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.where(a * b > 0.0, np.where(np.abs(a) <= np.abs(b), a, b), 0.0)


def kolgan_slopes(grad_L, grad_R, internode, dW):
    """Limited left/right slopes at a face from the upwind-element gradients.

    internode = N_j - N_i; dW = W_j - W_i.  Both slopes limit half the
    gradient projection against the node jump.
    """
    pL = 0.5 * np.einsum("...d,...d->...", np.asarray(grad_L, dtype=float), np.asarray(internode, dtype=float))
    pR = 0.5 * np.einsum("...d,...d->...", np.asarray(grad_R, dtype=float), np.asarray(internode, dtype=float))
    return minmod(pL, dW), minmod(pR, dW)


def kolgan_flux(W_i, W_j, W_iL, W_jR, U_i, U_j, eta, mode="decoupled", equation="momentum", rho=1.0):
    """Centred part on node states, dissipation on the reconstructed pair.

    alpha_RS is evaluated on the reconstructed states: for the momentum
    equation their own velocities W_L/rho, W_R/rho; for scalars the advecting
    node velocities.
    """
    W_i, W_j = np.asarray(W_i, dtype=float), np.asarray(W_j, dtype=float)
    W_iL, W_jR = np.asarray(W_iL, dtype=float), np.asarray(W_jR, dtype=float)
    un_i = np.dot(np.asarray(U_i), np.asarray(eta))
    un_j = np.dot(np.asarray(U_j), np.asarray(eta))
    if equation == "momentum":
        alpha = rusanov_alpha(W_iL / rho, W_jR / rho, eta, mode, equation)
    else:
        alpha = rusanov_alpha(U_i, U_j, eta, mode, equation)
    return 0.5 * (un_i * W_i + un_j * W_j) - 0.5 * alpha * (W_jR - W_iL)


def eno_select(grad_upwind, grad_aux, offset):
    """Pick, per component, the candidate whose projection on `offset` is smaller.

    Ties keep the upwind-element candidate.  Returns (gradients, projections).
    """
    gu = np.asarray(grad_upwind, dtype=float)
    ga = np.asarray(grad_aux, dtype=float)
    off = np.asarray(offset, dtype=float)
    pu = np.einsum("...d,...d->...", gu, off)
    pa = np.einsum("...d,...d->...", ga, off)
    keep = np.abs(pu) <= np.abs(pa)
    grad = np.where(keep[..., None], gu, ga)
    return grad, np.where(keep, pu, pa)


def lader_evolve_flux_states(W_iN, W_jN, Z_i, Z_j, diff_i, diff_j, dist, dt):
    """Half-step evolved face states: identical correction added to both sides.

    Z_s are the node normal fluxes (U_s . n) W_s through the unit normal,
    diff_s = alpha_s (gradW)^s . n / rho, and dist the internode distance
    projected on the normal.  The advective part uses the node flux jump, the
    diffusive part the jump of the one-sided gradient fluxes; both divided by
    dist, which plays the role of the 1D grid spacing.
    """
    dist = np.asarray(dist, dtype=float)
    if np.any(dist <= 0.0):
        raise DegenerateGeometryError("non-positive interface length scale")
    corr = (0.5 * dt / dist) * (-(Z_j - Z_i) + (diff_j - diff_i))
    return W_iN + corr, W_jN + corr


def lader_flux(W_L, W_R, U_L, U_R, eta, mode="decoupled", equation="momentum"):
    """Rusanov flux on the evolved states; alpha from the evolved velocities."""
    alpha = rusanov_alpha(U_L, U_R, eta, mode, equation)
    return rusanov_flux(W_L, W_R, U_L, U_R, eta, alpha)


def viscous_flux_galerkin(grad_T, eta, coeff, k_pair=None):
    """coeff * (grad)_T . eta, plus the -1/3 (W_k,i + W_k,j) eta turbulence term.

    grad_T: (.., 3) for a scalar or (.., 3, 3) for the velocity (du_a/dx_b);
    the returned flux matches the shape of the transported quantity.
    """
    grad_T = np.asarray(grad_T, dtype=float)
    eta = np.asarray(eta, dtype=float)
    flux = coeff * np.einsum("...d,...d->...", grad_T, np.broadcast_to(eta, grad_T.shape))
    if k_pair is not None:
        flux = flux - (1.0 / 3.0) * (k_pair[0] + k_pair[1]) * eta
    return flux


def viscous_flux_orthogonal(W_i, W_j, dist, area, coeff):
    """Two-point orthogonal diffusion flux; the non-orthogonal part is dropped."""
    return coeff * (np.asarray(W_j, dtype=float) - np.asarray(W_i, dtype=float)) / dist * area


def pressure_face_term(pi_vals, eta):
    """[5/12 (pi(V1)+pi(V2)) + 1/12 (pi(V3)+pi(V4))] eta for an interface.

    V1, V2 are the shared-edge vertices of the interface triangle, V3/V4 the
    remaining vertices of the owning element; the weights sum to one.
    """
    pi_vals = np.asarray(pi_vals, dtype=float)
    coef = PRESSURE_W_EDGE * (pi_vals[..., 0] + pi_vals[..., 1]) + PRESSURE_W_FAR * (
        pi_vals[..., 2] + pi_vals[..., 3]
    )
    return coef[..., None] * np.asarray(eta, dtype=float)


# ---------------------------------------------------------------------------
# packed multi-component state and the vectorized stage update
# ---------------------------------------------------------------------------

@dataclass
class ComponentLayout:
    """Column layout of the packed conservative array (momentum first)."""

    n_momentum: int = 3
    has_turbulence: bool = False
    n_species: int = 0

    @property
    def n_columns(self):
        return self.n_momentum + (2 if self.has_turbulence else 0) + self.n_species

    @property
    def slc_k(self):
        return 3 if self.has_turbulence else None

    @property
    def slc_eps(self):
        return 4 if self.has_turbulence else None

    @property
    def slc_y(self):
        if self.n_species == 0:
            return None
        start = 3 + (2 if self.has_turbulence else 0)
        return slice(start, start + self.n_species)

    def scalar_columns(self):
        return list(range(3, self.n_columns))


def pack_state(state, config):
    """Stack the transported conservative fields into one (nn, m) array."""
    cols = [state.w_u]
    if config.turbulence:
        cols += [state.w_k[:, None], state.w_eps[:, None]]
    if config.species:
        cols.append(state.w_y)
    layout = ComponentLayout(
        has_turbulence=config.turbulence,
        n_species=config.n_species if config.species else 0,
    )
    return np.concatenate(cols, axis=1), layout


def unpack_state(W, layout):
    out = {"w_u": W[:, :3]}
    if layout.has_turbulence:
        out["w_k"] = W[:, layout.slc_k]
        out["w_eps"] = W[:, layout.slc_eps]
    if layout.n_species:
        out["w_y"] = W[:, layout.slc_y]
    return out


def column_diffusivities(state, config, layout):
    """Per-node diffusion coefficient for every packed column (dynamic units)."""
    nn = state.w_u.shape[0]
    mu_t = state.mu_t if (config.turbulence and state.mu_t is not None) else np.zeros(nn)
    alpha = np.empty((nn, layout.n_columns))
    alpha[:, :3] = (config.mu + mu_t)[:, None]
    cf = config.constants
    if layout.has_turbulence:
        alpha[:, layout.slc_k] = config.mu + mu_t / cf.sigma_k
        alpha[:, layout.slc_eps] = config.mu + mu_t / cf.sigma_eps
    if layout.n_species:
        alpha[:, layout.slc_y] = (config.rho * config.diffusivity + mu_t / cf.sc_t)[:, None]
    return alpha


def _scatter_columns(acc, idx, vals):
    nn, m = acc.shape
    flat = np.bincount(
        (idx[:, None] * m + np.arange(m)).ravel(), weights=vals.ravel(), minlength=nn * m
    )
    acc += flat.reshape(nn, m)


def _alpha_rs_columns(unA_L, unA_R, layout, mode):
    """(ni, m) Rusanov coefficient per column from the signed normal speeds."""
    base = np.maximum(np.abs(unA_L), np.abs(unA_R))
    m = layout.n_columns
    alpha = np.empty((base.shape[0], m))
    alpha[:, :3] = (2.0 * base)[:, None]
    scal = 2.0 * base if mode == "coupled" else base
    for c in layout.scalar_columns():
        alpha[:, c] = scal
    return alpha


def transport_diffusion_step(state, dual, config, dt, f_u=None, open_patches=None):
    """Explicit FV update of all conservative variables over one step.

    Returns the intermediate fields (dict with w_u and, when active, w_k,
    w_eps, w_y).  Reaction/post-stage sources are *not* applied here; the
    momentum body force f_u (evaluated at the dual nodes, time n) is, since it
    belongs to the transport equation itself.  Boundary patches use the
    zero-gradient ghost treatment; Dirichlet nodes are rewritten by the driver
    afterwards.  Patches flagged in `open_patches` (outflow boundaries)
    upwind their convective flux against a still exterior, which coincides
    with zero-gradient whenever flow leaves the domain and damps momentary
    backflow.
    """
    W, layout = pack_state(state, config)
    rho = config.rho
    nn, m = W.shape

    alpha_node = column_diffusivities(state, config, layout)
    U = W[:, :3] / rho
    ii, jj = dual.iface_i, dual.iface_j
    eta = dual.iface_normal
    area = dual.iface_area
    nhat = dual.iface_unit_normal
    tet_c = dual.iface_tet

    Wi, Wj = W[ii], W[jj]
    un_i = np.einsum("ij,ij->i", U[ii], nhat)
    un_j = np.einsum("ij,ij->i", U[jj], nhat)

    needs_grads = config.scheme != "order1"
    grads = dual.element_gradients(W) if needs_grads else None  # (nt, m, 3)

    if config.scheme == "lader":
        ri = dual.iface_center - dual.nodes[ii]
        rj = dual.iface_center - dual.nodes[jj]
        gL, gR, gA = grads[dual.iface_tet_L], grads[dual.iface_tet_R], grads[tet_c]
        pr_Li = np.einsum("imd,id->im", gL, ri)
        pr_Ai = np.einsum("imd,id->im", gA, ri)
        pr_Rj = np.einsum("imd,id->im", gR, rj)
        pr_Aj = np.einsum("imd,id->im", gA, rj)
        keep_i = np.abs(pr_Li) <= np.abs(pr_Ai)
        keep_j = np.abs(pr_Rj) <= np.abs(pr_Aj)
        W_iN = Wi + np.where(keep_i, pr_Li, pr_Ai)
        W_jN = Wj + np.where(keep_j, pr_Rj, pr_Aj)
        if _LADER_ADVECTIVE_CK == "normal":
            corr = (-0.5 * dt / dual.iface_dist)[:, None] * (un_j[:, None] * Wj - un_i[:, None] * Wi)
        else:  # full gradient-based advective derivative
            Uf = 0.5 * (U[ii] + U[jj])
            gsel_i = np.where(keep_i[:, :, None], gL, gA)
            gsel_j = np.where(keep_j[:, :, None], gR, gA)
            advder = np.einsum("imd,id->im", 0.5 * (gsel_i + gsel_j), Uf)
            corr = -0.5 * dt * advder
        if config.lader_flux_diffusion:
            gn_Li = np.einsum("imd,id->im", gL, nhat)
            gn_Ai = np.einsum("imd,id->im", gA, nhat)
            gn_Rj = np.einsum("imd,id->im", gR, nhat)
            diff_i = alpha_node[ii] * np.where(keep_i, gn_Li, gn_Ai) / rho
            diff_j = alpha_node[jj] * np.where(keep_j, gn_Rj, gn_Ai) / rho
            corr += (0.5 * dt / dual.iface_dist)[:, None] * (diff_j - diff_i)
        WL = W_iN + corr
        WR = W_jN + corr
        unA_L = np.einsum("ij,ij->i", WL[:, :3], eta) / rho
        unA_R = np.einsum("ij,ij->i", WR[:, :3], eta) / rho
        alpha_rs = _alpha_rs_columns(unA_L, unA_R, layout, config.alpha_rs_mode)
        conv = 0.5 * (unA_L[:, None] * WL + unA_R[:, None] * WR) - 0.5 * alpha_rs * (WR - WL)
    elif config.scheme in ("cvc-orth", "cvc-g"):
        dvec = dual.nodes[jj] - dual.nodes[ii]
        dW = Wj - Wi
        pL = 0.5 * np.einsum("imd,id->im", grads[dual.iface_tet_L], dvec)
        pR = 0.5 * np.einsum("imd,id->im", grads[dual.iface_tet_R], dvec)
        d_L = np.where(pL * dW > 0.0, np.where(np.abs(pL) <= np.abs(dW), pL, dW), 0.0)
        d_R = np.where(pR * dW > 0.0, np.where(np.abs(pR) <= np.abs(dW), pR, dW), 0.0)
        WL = Wi + d_L
        WR = Wj - d_R
        unA_L = np.einsum("ij,ij->i", WL[:, :3], eta) / rho
        unA_R = np.einsum("ij,ij->i", WR[:, :3], eta) / rho
        alpha_rs = _alpha_rs_columns(unA_L, unA_R, layout, config.alpha_rs_mode)
        conv = 0.5 * (un_i * area)[:, None] * Wi + 0.5 * (un_j * area)[:, None] * Wj
        conv -= 0.5 * alpha_rs * (WR - WL)
    else:  # order1
        alpha_rs = _alpha_rs_columns(un_i * area, un_j * area, layout, config.alpha_rs_mode)
        conv = 0.5 * (un_i * area)[:, None] * Wi + 0.5 * (un_j * area)[:, None] * Wj
        conv -= 0.5 * alpha_rs * (Wj - Wi)

    # viscous fluxes
    coeff = 0.5 * (alpha_node[ii] + alpha_node[jj])  # (ni, m)
    if config.scheme == "cvc-orth":
        dist_nodes = np.linalg.norm(dual.nodes[jj] - dual.nodes[ii], axis=1)
        visc = coeff * (Wj - Wi) / rho / dist_nodes[:, None] * area[:, None]
    else:
        if config.scheme == "lader":
            P = _lader_evolved_diffusion_fields(W, layout, alpha_node, dual, config, dt)
        else:
            P = W / rho
        gradsP = dual.element_gradients(P)
        visc = coeff * np.einsum("imd,id->im", gradsP[tet_c], eta)
    if layout.has_turbulence:
        kk = layout.slc_k
        visc[:, :3] -= (1.0 / 3.0) * (W[ii, kk] + W[jj, kk])[:, None] * eta

    # pressure quadrature on interfaces (momentum only)
    pi = state.pi
    pcoef = PRESSURE_W_EDGE * (pi[dual.iface_edge[:, 0]] + pi[dual.iface_edge[:, 1]])
    pcoef += PRESSURE_W_FAR * (pi[dual.iface_far[:, 0]] + pi[dual.iface_far[:, 1]])

    total = conv - visc
    total[:, :3] += pcoef[:, None] * eta

    flux_sum = np.zeros((nn, m))
    _scatter_columns(flux_sum, ii, total)
    _scatter_columns(flux_sum, jj, -total)

    # boundary patches: zero-gradient ghosts
    bn = dual.bpatch_node
    beta = dual.bpatch_normal
    unA_b = np.einsum("ij,ij->i", U[bn], beta)
    if open_patches is not None:
        unA_b = np.where(open_patches, np.maximum(unA_b, 0.0), unA_b)
    btotal = unA_b[:, None] * W[bn]
    if layout.has_turbulence:
        btotal[:, :3] += (2.0 / 3.0) * W[bn, layout.slc_k][:, None] * beta
    bpress = pi[dual.face_vertices[bn]].mean(axis=1)
    btotal[:, :3] += bpress[:, None] * beta
    _scatter_columns(flux_sum, bn, btotal)

    Wt = W - (dt / dual.cell_volume)[:, None] * flux_sum
    if f_u is not None:
        Wt[:, :3] += dt * f_u
    if not np.all(np.isfinite(Wt)):
        bad = int(np.argwhere(~np.isfinite(Wt))[0][0])
        raise DivergenceDetectedError(
            f"non-finite intermediate state at node {bad}, step {state.step_index}"
        )
    return unpack_state(Wt, layout)


def _lader_evolved_diffusion_fields(W, layout, alpha_node, dual, config, dt):
    """Primitive fields evolved half a step by their own diffusion operators.

    Per node, v = alpha grad(W/rho) (minus the 2/3 rho k identity part for the
    momentum block); the divergence of v is averaged over the node's adjacent
    elements and added as (dt/2) div v.  Advection is deliberately absent.
    """
    rho = config.rho
    grads = dual.element_gradients(W / rho)  # (nt, m, 3)
    grads_node = dual.node_average_from_tets(grads)  # (nn, m, 3)
    v = alpha_node[:, :, None] * grads_node
    if layout.has_turbulence:
        kk = layout.slc_k
        w_k = W[:, kk]
        for a in range(3):
            v[:, a, a] -= (2.0 / 3.0) * w_k
    nt = dual.fe.n_tets
    m = W.shape[1]
    vflat = v.reshape(v.shape[0], 3 * m)
    gradv = dual.element_gradients(vflat).reshape(nt, m, 3, 3)  # d v[m,d] / dx_e
    divv = np.einsum("tmdd->tm", gradv)
    divv_node = dual.node_average_from_tets(divv)
    return W / rho + 0.5 * dt * divv_node
