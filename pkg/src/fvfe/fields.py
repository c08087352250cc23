"""Discrete unknowns and the staggered-mesh transfer operators.

Conservative variables (momentum density, rho*k, rho*eps, rho*y) live on the
dual nodes; the pressure perturbation lives on the FE vertices.  Transfers
between the two representations are plain averages: momentum is redefined
constant per element as the mean of its four face-node values, and vertex
pressure is sampled at face barycenters as the mean of the face's vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TurbulenceCoeffs:
    """Closure coefficients of the k-eps model (literature values)."""

    c_mu: float = 0.09
    c1_eps: float = 1.44
    c2_eps: float = 1.92
    sigma_k: float = 1.0
    sigma_eps: float = 1.3
    sc_t: float = 0.7


@dataclass
class SchemeConfig:
    """Physical constants, model constants and scheme selection.

    scheme: "order1" | "cvc-orth" | "cvc-g" | "lader"
    alpha_rs_mode: "coupled" doubles the scalar upwind coefficient, "decoupled"
    uses the per-equation form (half for k, eps, y).
    lader_flux_diffusion: keep the diffusion contribution in the evolved flux
    states (the full half-step form); switching it off drops that term.
    """

    rho: float = 1.0
    mu: float = 1e-2
    diffusivity: float = 1e-3
    cfl: float = 1.0
    scheme: str = "lader"
    lader_flux_diffusion: bool = True
    alpha_rs_mode: str = "decoupled"
    turbulence: bool = False
    species: bool = False
    n_species: int = 1
    solver_tol: float = 1e-10
    solver_max_iter: int = 20000
    k_floor: float = 1e-10
    eps_floor: float = 1e-10
    constants: TurbulenceCoeffs = field(default_factory=TurbulenceCoeffs)

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("density must be positive")
        if self.cfl <= 0.0:
            raise ValueError("CFL must be positive")
        if self.mu < 0.0:
            raise ValueError("viscosity must be non-negative")
        if self.scheme not in ("order1", "cvc-orth", "cvc-g", "lader"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.alpha_rs_mode not in ("coupled", "decoupled"):
            raise ValueError(f"unknown alpha_rs mode {self.alpha_rs_mode!r}")


@dataclass
class FlowState:
    """Conservative fields on dual nodes plus vertex pressure perturbation.

    w_u   (nn, 3) momentum density rho*u
    w_k   (nn,)   rho*k        (turbulence only)
    w_eps (nn,)   rho*eps
    w_y   (nn, n_species) rho*y (species only)
    pi    (nv,)   pressure perturbation on FE vertices
    mu_t  (nn,)   turbulent viscosity
    """

    w_u: np.ndarray
    pi: np.ndarray
    w_k: np.ndarray = None
    w_eps: np.ndarray = None
    w_y: np.ndarray = None
    mu_t: np.ndarray = None
    time: float = 0.0
    step_index: int = 0

    @classmethod
    def zeros(cls, dual, config):
        nn = dual.n_nodes
        nv = dual.fe.n_vertices
        st = cls(w_u=np.zeros((nn, 3)), pi=np.zeros(nv), mu_t=np.zeros(nn))
        if config.turbulence:
            st.w_k = np.zeros(nn)
            st.w_eps = np.zeros(nn)
        if config.species:
            st.w_y = np.zeros((nn, config.n_species))
        return st

    def validate(self, dual, config):
        nn, nv = dual.n_nodes, dual.fe.n_vertices
        if self.w_u.shape != (nn, 3) or self.pi.shape != (nv,):
            raise ValueError("state arrays do not match the mesh")
        arrays = [self.w_u, self.pi]
        if config.turbulence:
            arrays += [self.w_k, self.w_eps]
        if config.species:
            arrays.append(self.w_y)
        for a in arrays:
            if a is None or not np.all(np.isfinite(a)):
                raise ValueError("state contains missing or non-finite entries")

    def copy(self):
        return FlowState(
            w_u=self.w_u.copy(),
            pi=self.pi.copy(),
            w_k=None if self.w_k is None else self.w_k.copy(),
            w_eps=None if self.w_eps is None else self.w_eps.copy(),
            w_y=None if self.w_y is None else self.w_y.copy(),
            mu_t=None if self.mu_t is None else self.mu_t.copy(),
            time=self.time,
            step_index=self.step_index,
        )


def velocity(w_u, rho):
    """u = w_u / rho (rho constant; zero density is rejected at config load)."""
    return w_u / rho


def momentum_to_tets(w_u, dual):
    """Per-element constant momentum: mean of the four face-node values."""
    return w_u[dual.tet_faces].mean(axis=1)


def pressure_vertex_values(pi, tet_vertices):
    """Vertex samples pi(V1..V4) of the element owning an interface."""
    pi = np.asarray(pi)
    tet_vertices = np.asarray(tet_vertices)
    if tet_vertices.shape[-1] != 4:
        raise ValueError("an element has exactly four vertices")
    if tet_vertices.size and tet_vertices.max() >= pi.shape[0]:
        raise ValueError("vertex index exceeds the pressure array")
    return pi[tet_vertices]


def pressure_at_nodes(pi, dual):
    """Vertex pressure sampled at face barycenters (mean of the face's vertices)."""
    return pi[dual.face_vertices].mean(axis=1)
