"""k-eps closure: turbulent viscosity, production, and the post-projection
semi-implicit reaction updates for turbulence and species."""

from __future__ import annotations

import numpy as np

from .fields import TurbulenceCoeffs


def turbulent_viscosity(w_k, w_eps, rho, coeffs=None, eps_floor=1e-10):
    """mu_t = rho * C_mu * k^2 / eps, with eps floored to keep the division total."""
    coeffs = coeffs or TurbulenceCoeffs()
    k = np.asarray(w_k, dtype=float) / rho
    eps = np.maximum(np.asarray(w_eps, dtype=float) / rho, eps_floor)
    return rho * coeffs.c_mu * k * k / eps


def production_gk(grad_u, mu_t):
    """Kinetic-energy production from the mean velocity gradients.

    grad_u: (..., 3, 3) with grad_u[..., a, b] = du_a/dx_b.  Uses the strain
    form (mu_t/2) * sum_ij (du_i/dx_j + du_j/dx_i)^2, which vanishes for rigid
    rotations and matches the manufactured turbulent source terms.
    """
    g = np.asarray(grad_u, dtype=float)
    s = g + np.swapaxes(g, -1, -2)
    return 0.5 * np.asarray(mu_t, dtype=float) * np.einsum("...ij,...ij->...", s, s)


def reaction_update_k_eps(
    wt_k, wt_eps, wn_k, wn_eps, g_k, f_k, f_eps, dt, coeffs=None, k_floor=1e-10, eps_floor=1e-10
):
    """Post-projection reaction step for the turbulence pair.

    k is advanced explicitly (dissipation uses the old w_eps); the eps
    dissipation is taken semi-implicitly, linear in the unknown, and solved in
    closed form.  Both results are floored afterwards.
    """
    coeffs = coeffs or TurbulenceCoeffs()
    wn_k = np.maximum(wn_k, k_floor)
    wn_eps = np.maximum(wn_eps, eps_floor)
    ratio = wn_eps / wn_k

    k_new = wt_k + dt * (g_k - wn_eps + f_k)
    eps_new = (wt_eps + dt * (coeffs.c1_eps * ratio * g_k + f_eps)) / (
        1.0 + dt * coeffs.c2_eps * ratio
    )
    return np.maximum(k_new, k_floor), np.maximum(eps_new, eps_floor)


def species_source_update(wt_y, f_y, dt):
    """Pointwise source step for the species conservative variables."""
    return wt_y + dt * f_y
