"""Exact solutions, manufactured source terms, error norms and the
drag/lift post-processor.

The manufactured sources are long closed-form expressions; their
transcription is guarded by `pde_residual`, a high-order finite-difference
oracle that evaluates the governing equations on the exact fields and must
return ~0 at random space-time points before any solver test is trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .closure import production_gk
from .fields import TurbulenceCoeffs

PI = np.pi


@dataclass
class ExactSolution:
    """Closed-form fields and matching sources for a verification case.

    Field callables take (pts, t) with pts of shape (n, 3) and return (n,)
    or (n, 3) arrays.  Sources absent from a case are None.
    """

    name: str
    mu: float
    rho: float = 1.0
    diffusivity: float = 0.0
    turbulence: bool = False
    species: bool = False
    coeffs: TurbulenceCoeffs = field(default_factory=TurbulenceCoeffs)
    pi: object = None
    u: object = None
    k: object = None
    eps: object = None
    y: object = None
    f_u: object = None
    f_k: object = None
    f_eps: object = None
    f_y: object = None
    domain: tuple = (((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)))


def mms_laminar(mu=1e-2):
    """Manufactured laminar flow on the unit cube."""

    def u(p, t):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        return np.stack(
            [
                np.sin(PI * y * t) * np.cos(PI * z * t),
                -np.cos(PI * z**3 * t),
                np.exp(-2 * PI * x * t**2),
            ],
            axis=1,
        )

    def pi(p, t):
        return np.cos(PI * t * (p[:, 0] + p[:, 1] + p[:, 2]))

    def f_u(p, t):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        sp = np.sin(PI * t * (x + y + z))
        ex = np.exp(-2 * PI * x * t**2)
        f1 = (
            PI * y * np.cos(PI * t * y) * np.cos(PI * t * z)
            - PI * t * sp
            - PI * z * np.sin(PI * t * y) * np.sin(PI * t * z)
            + 2 * PI**2 * t**2 * mu * np.sin(PI * t * y) * np.cos(PI * t * z)
            - PI * t * np.cos(PI * t * z**3) * np.cos(PI * t * y) * np.cos(PI * t * z)
            - PI * t * np.sin(PI * t * y) * np.sin(PI * t * z) * ex
        )
        f2 = (
            PI * z**3 * np.sin(PI * t * z**3)
            - PI * t * sp
            - 6 * PI * t * z * mu * np.sin(PI * t * z**3)
            - 9 * PI**2 * t**2 * z**4 * mu * np.cos(PI * t * z**3)
            + 3 * PI * t * z**2 * ex * np.sin(PI * t * z**3)
        )
        f3 = (
            -PI * t * sp
            - 4 * PI**2 * t**4 * mu * ex
            - 4 * PI * t * x * ex
            - 2 * PI * t**2 * np.sin(PI * t * y) * ex * np.cos(PI * t * z)
        )
        return np.stack([f1, f2, f3], axis=1)

    return ExactSolution(name="mms1", mu=mu, pi=pi, u=u, f_u=f_u)


def mms_turbulent(mu=1e-2, diffusivity=1e-3, coeffs=None):
    """Manufactured turbulent flow with one transported species on the unit cube."""
    coeffs = coeffs or TurbulenceCoeffs()
    cmu, sk, se, sct = coeffs.c_mu, coeffs.sigma_k, coeffs.sigma_eps, coeffs.sc_t
    c1, c2 = coeffs.c1_eps, coeffs.c2_eps
    lam = mms_laminar(mu)

    def k(p, t):
        return np.sin(PI * p[:, 0] * t) + 2.0

    def eps(p, t):
        return np.exp(-PI * p[:, 2] * t) + 1.0

    def y(p, t):
        return (np.sin(PI * p[:, 0] * t) + 2.0)[:, None]

    def f_u(p, t):
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        S = np.sin(PI * t * x) + 2.0
        E1 = np.exp(-PI * t * z) + 1.0
        ez = np.exp(-PI * t * z)
        ex = np.exp(-2 * PI * t**2 * x)
        base = lam.f_u(p, t)
        f1 = (
            base[:, 0]
            + (2 * PI * t * np.cos(PI * t * x)) / 3
            + (2 * PI**2 * cmu * t**2 * np.sin(PI * t * yy) * np.cos(PI * t * z) * S**2) / E1
            + (PI**2 * cmu * t**2 * np.sin(PI * t * yy) * np.sin(PI * t * z) * ez * S**2) / E1**2
        )
        f2 = (
            base[:, 1]
            - (9 * PI**2 * cmu * t**2 * z**4 * np.cos(PI * t * z**3) * S**2) / E1
            - (6 * PI * cmu * t * z * np.sin(PI * t * z**3) * S**2) / E1
            - (3 * PI**2 * cmu * t**2 * z**2 * ez * np.sin(PI * t * z**3) * S**2) / E1**2
        )
        f3 = (
            base[:, 2]
            + (4 * PI**2 * cmu * t**3 * ex * np.cos(PI * t * x) * S) / E1
            - (4 * PI**2 * cmu * t**4 * ex * S**2) / E1
        )
        return np.stack([f1, f2, f3], axis=1)

    def _gk_like(p, t):
        # the three distinct strain components squared, times mu_t
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        S = np.sin(PI * t * x) + 2.0
        E1 = np.exp(-PI * t * z) + 1.0
        ex = np.exp(-2 * PI * t**2 * x)
        return (
            (cmu * S**2 * (2 * PI * t**2 * ex + PI * t * np.sin(PI * t * yy) * np.sin(PI * t * z)) ** 2) / E1
            + (9 * PI**2 * cmu * t**2 * z**4 * np.sin(PI * t * z**3) ** 2 * S**2) / E1
            + (PI**2 * cmu * t**2 * np.cos(PI * t * yy) ** 2 * np.cos(PI * t * z) ** 2 * S**2) / E1
        )

    def f_k(p, t):
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        S = np.sin(PI * t * x) + 2.0
        E1 = np.exp(-PI * t * z) + 1.0
        ez = np.exp(-PI * t * z)
        return (
            ez
            + PI * x * np.cos(PI * t * x)
            - _gk_like(p, t)
            + PI**2 * t**2 * mu * np.sin(PI * t * x)
            + PI * t * np.sin(PI * t * yy) * np.cos(PI * t * x) * np.cos(PI * t * z)
            - (2 * PI**2 * cmu * t**2 * np.cos(PI * t * x) ** 2 * S) / (sk * E1)
            + (PI**2 * cmu * t**2 * np.sin(PI * t * x) * S**2) / (sk * E1)
            + 1.0
        )

    def f_eps(p, t):
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        S = np.sin(PI * t * x) + 2.0
        E1 = np.exp(-PI * t * z) + 1.0
        ez = np.exp(-PI * t * z)
        ex = np.exp(-2 * PI * t**2 * x)
        return (
            (c2 * E1**2) / S
            - PI * z * ez
            - PI**2 * t**2 * mu * ez
            - (c1 * E1 * _gk_like(p, t)) / S
            - PI * t * ez * ex
            - (PI**2 * cmu * t**2 * ez * S**2) / (se * E1)
            + (PI**2 * cmu * t**2 * np.exp(-2 * PI * t * z) * S**2) / (se * E1**2)
        )

    def f_y(p, t):
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        S = np.sin(PI * t * x) + 2.0
        E1 = np.exp(-PI * t * z) + 1.0
        out = (
            PI * x * np.cos(PI * t * x)
            + PI**2 * t**2 * np.sin(PI * t * x) * (diffusivity + (cmu * S**2) / (sct * E1))
            + PI * t * np.sin(PI * t * yy) * np.cos(PI * t * x) * np.cos(PI * t * z)
            - (2 * PI**2 * cmu * t**2 * np.cos(PI * t * x) ** 2 * S) / (sct * E1)
        )
        return out[:, None]

    return ExactSolution(
        name="mms2",
        mu=mu,
        diffusivity=diffusivity,
        turbulence=True,
        species=True,
        coeffs=coeffs,
        pi=lam.pi,
        u=lam.u,
        k=k,
        eps=eps,
        y=y,
        f_u=f_u,
        f_k=f_k,
        f_eps=f_eps,
        f_y=f_y,
    )


def gaussian_sphere(sigma0=0.08, diffusivity=1e-2):
    """Rotating, diffusing normal distribution in a flat box.

    The flow u = (-y, x, 0) needs the body force (-x, -y, 0); the species
    profile is the exact heat kernel in the co-rotating frame.
    """
    if sigma0 <= 0.0:
        raise ValueError("sigma0 must be positive")

    def u(p, t):
        return np.stack([-p[:, 1], p[:, 0], np.zeros(p.shape[0])], axis=1)

    def pi(p, t):
        return np.zeros(p.shape[0])

    def f_u(p, t):
        return np.stack([-p[:, 0], -p[:, 1], np.zeros(p.shape[0])], axis=1)

    def y(p, t):
        x, yy, z = p[:, 0], p[:, 1], p[:, 2]
        xb = x * np.cos(t) + yy * np.sin(t)
        yb = -x * np.sin(t) + yy * np.cos(t)
        r = (xb + 0.25) ** 2 + yb**2 + z**2
        sig2 = sigma0**2 + 2.0 * t * diffusivity
        val = (sigma0 / np.sqrt(sig2)) ** 3 * np.exp(-r / (2.0 * sig2))
        return val[:, None]

    def f_y(p, t):
        return np.zeros((p.shape[0], 1))

    return ExactSolution(
        name="gaussian",
        mu=diffusivity,
        diffusivity=diffusivity,
        species=True,
        pi=pi,
        u=u,
        y=y,
        f_u=f_u,
        f_y=f_y,
        domain=((-0.9, 0.9), (-0.9, 0.9), (-0.3, 0.3)),
    )


# fourth-order central difference stencils
_D1 = (np.array([1.0, -8.0, 8.0, -1.0]) / 12.0, np.array([-2, -1, 1, 2]))
_D2 = (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, np.array([-2, -1, 0, 1, 2]))


def _fd(f, pts, t, axis, order, h):
    """Finite-difference derivative of f(pts, t) along axis 0..2 (space) or 3 (time)."""
    weights, offsets = _D1 if order == 1 else _D2
    acc = 0.0
    for w, o in zip(weights, offsets):
        if axis == 3:
            acc = acc + w * f(pts, t + o * h)
        else:
            q = pts.copy()
            q[:, axis] += o * h
            acc = acc + w * f(q, t)
    return acc / (h if order == 1 else h * h)


def pde_residual(sol, pts, t, h=2e-3):
    """Residual of every governing equation on the exact fields of `sol`.

    Returns a dict of per-point residual arrays.  Derivatives are fourth-order
    central differences with spacing h, so a correct source transcription
    leaves residuals at the truncation level (<< 1e-6 for these fields).
    """
    pts = np.asarray(pts, dtype=float)
    rho, mu = sol.rho, sol.mu
    cf = sol.coeffs
    out = {}

    uf = sol.u
    grad_u = np.stack([_fd(uf, pts, t, ax, 1, h) for ax in range(3)], axis=2)  # du_a/dx_b
    uval = uf(pts, t)

    if sol.turbulence:
        mu_t = lambda p, tt: rho * cf.c_mu * sol.k(p, tt) ** 2 / sol.eps(p, tt)
    else:
        mu_t = lambda p, tt: np.zeros(p.shape[0])
    mu_t_val = mu_t(pts, t)

    # momentum: d_t w_u + div(u w_u) + grad pi - div[(mu+mu_t) grad u] + (2/3) grad(rho k) = f_u
    w_of = lambda p, tt: rho * uf(p, tt)
    conv = np.stack(
        [
            sum(_fd(lambda p, tt, b=b, a=a: uf(p, tt)[:, b] * rho * uf(p, tt)[:, a], pts, t, b, 1, h) for b in range(3))
            for a in range(3)
        ],
        axis=1,
    )
    grad_pi = np.stack([_fd(sol.pi, pts, t, ax, 1, h) for ax in range(3)], axis=1)
    visc = np.stack(
        [
            sum(
                _fd(
                    lambda p, tt, b=b, a=a: (mu + mu_t(p, tt)) * _fd(lambda q, ss: uf(q, ss)[:, a], p, tt, b, 1, h),
                    pts,
                    t,
                    b,
                    1,
                    h,
                )
                for b in range(3)
            )
            for a in range(3)
        ],
        axis=1,
    )
    dwdt = rho * _fd(uf, pts, t, 3, 1, h)
    res_u = dwdt + conv + grad_pi - visc - sol.f_u(pts, t)
    if sol.turbulence:
        gk_grad = np.stack(
            [_fd(lambda p, tt, ax=ax: rho * sol.k(p, tt), pts, t, ax, 1, h) for ax in range(3)], axis=1
        )
        res_u = res_u + (2.0 / 3.0) * gk_grad
    out["momentum"] = res_u

    def scalar_residual(wfun, coeff_fun, extra_fun, source_fun):
        conv_s = sum(
            _fd(lambda p, tt, b=b: uf(p, tt)[:, b] * wfun(p, tt), pts, t, b, 1, h) for b in range(3)
        )
        diff_s = sum(
            _fd(
                lambda p, tt, b=b: coeff_fun(p, tt) * _fd(lambda q, ss: wfun(q, ss) / rho, p, tt, b, 1, h),
                pts,
                t,
                b,
                1,
                h,
            )
            for b in range(3)
        )
        return _fd(wfun, pts, t, 3, 1, h) + conv_s - diff_s + extra_fun() - source_fun(pts, t)

    if sol.turbulence:
        g_k = production_gk(grad_u, mu_t_val)
        w_k = lambda p, tt: rho * sol.k(p, tt)
        w_e = lambda p, tt: rho * sol.eps(p, tt)
        out["k"] = scalar_residual(
            w_k,
            lambda p, tt: mu + mu_t(p, tt) / cf.sigma_k,
            lambda: rho * sol.eps(pts, t) - g_k,
            sol.f_k,
        )
        out["eps"] = scalar_residual(
            w_e,
            lambda p, tt: mu + mu_t(p, tt) / cf.sigma_eps,
            lambda: cf.c2_eps * (rho * sol.eps(pts, t)) ** 2 / (rho * sol.k(pts, t))
            - cf.c1_eps * sol.eps(pts, t) / sol.k(pts, t) * g_k,
            sol.f_eps,
        )
    if sol.species:
        out["y"] = scalar_residual(
            lambda p, tt: rho * sol.y(p, tt)[:, 0],
            lambda p, tt: rho * sol.diffusivity + mu_t(p, tt) / cf.sc_t,
            lambda: 0.0,
            lambda p, tt: sol.f_y(p, tt)[:, 0],
        )
    return out


class ErrorAccumulator:
    """Space-time discrete l2(L2) error accumulator over a run.

    E^2 = sum_n dt_n sum_i |C_i| (X_i^n - x(N_i, t^n))^2, vector fields summed
    over components.  Node ordering and time-window splits do not matter.
    """

    def __init__(self, dual):
        self.weights = dual.cell_volume
        self.sums = {}

    def add(self, dt, name, numeric, exact):
        diff = np.asarray(numeric) - np.asarray(exact)
        if diff.ndim == 1:
            diff = diff[:, None]
        val = float(np.sum(self.weights @ (diff**2)))
        self.sums[name] = self.sums.get(name, 0.0) + dt * val

    def errors(self):
        return {k: float(np.sqrt(v)) for k, v in self.sums.items()}


@dataclass
class ErrorReport:
    """Errors per mesh and variable, with pairwise observed orders."""

    mesh_sizes: list
    errors: dict  # variable -> list of errors, one per mesh

    def orders(self):
        out = {}
        for var, errs in self.errors.items():
            seq = []
            for a in range(len(errs) - 1):
                ratio = np.log(errs[a] / errs[a + 1]) / np.log(
                    self.mesh_sizes[a] / self.mesh_sizes[a + 1]
                )
                seq.append(float(ratio))
            out[var] = seq
        return out

    def rows(self):
        """CSV rows: mesh, variable, error, order (order blank on the first mesh)."""
        orders = self.orders()
        rows = []
        for var, errs in self.errors.items():
            for a, err in enumerate(errs):
                order = "" if a == 0 else f"{orders[var][a - 1]:.6g}"
                rows.append((f"M{a + 1}", var, f"{err:.6e}", order))
        return rows


def locate_point(fe, point):
    """Element containing `point` and its barycentric coordinates (brute force)."""
    p = np.asarray(point, dtype=float)
    v = fe.vertices[fe.tets]
    mats = np.concatenate([np.ones((fe.n_tets, 4, 1)), v], axis=2)
    rhs = np.tile(np.array([1.0, p[0], p[1], p[2]])[:, None], (fe.n_tets, 1, 1))
    lam = np.linalg.solve(np.swapaxes(mats, 1, 2), rhs)[:, :, 0]
    ok = np.all(lam >= -1e-10, axis=1)
    if not np.any(ok):
        raise ValueError(f"point {point} lies outside the mesh")
    tet = int(np.argmax(ok))
    return tet, lam[tet]


def pressure_probe(fe, pi, point):
    """P1 interpolation of the vertex pressure at an arbitrary point."""
    tet, lam = locate_point(fe, point)
    return float(lam @ pi[fe.tets[tet]])


def drag_lift(dual, pi, w_u, rho, mu, surface_tag, p1=None, p2=None, scale=500.0 / 0.41):
    """Drag and lift coefficients over the boundary patches with `surface_tag`.

    One-point quadrature per surface triangle; the tangential-velocity normal
    derivative comes from the Galerkin gradient of u on the adjacent element.
    Returns (c_d, c_l, Dpi) with Dpi = pi(p1) - pi(p2) when probes are given.
    """
    sel = dual.bpatch_tag == surface_tag
    if not np.any(sel):
        raise ValueError(f"no boundary patches tagged {surface_tag}")
    normals = dual.bpatch_normal[sel]
    areas = np.linalg.norm(normals, axis=1)
    n_out = normals / areas[:, None]  # outward from the flow domain
    n_s = -n_out  # inward unit normal with respect to the domain
    tets = dual.bpatch_tet[sel]
    tris = dual.face_vertices[dual.bpatch_node[sel]]

    grad_u = dual.element_gradients(w_u / rho)  # (nt, 3, 3): du_a/dx_b
    g = grad_u[tets]
    nx, ny = n_s[:, 0], n_s[:, 1]
    # u_tau = u . (n_y, -n_x, 0); d u_tau / d n_S with the triangle's fixed normal
    grad_utau = ny[:, None] * g[:, 0, :] - nx[:, None] * g[:, 1, :]
    dutau_dn = np.einsum("ij,ij->i", grad_utau, n_s)

    pi_c = pi[tris].mean(axis=1)
    f_d = float(np.sum(areas * (mu * dutau_dn * ny - pi_c * nx)))
    f_l = float(np.sum(areas * (-mu * dutau_dn * nx - pi_c * ny)))

    dpi = None
    if p1 is not None and p2 is not None:
        dpi = pressure_probe(dual.fe, pi, p1) - pressure_probe(dual.fe, pi, p2)
    return scale * f_d, scale * f_l, dpi
