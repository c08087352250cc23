"""One-dimensional LADER scheme for the advection-diffusion-reaction equation.

    q_t + lam * q_x = (alpha(x,t) * q_x)_x + beta * q

Second order in space and time.  The flux at an interface combines an upwind
slope reconstruction with a half-step Taylor evolution in which time
derivatives are replaced by spatial ones through the equation itself; the
diffusion and reaction terms are evolved separately, neglecting advection.
The module also carries the Fourier amplification factor of the
constant-coefficient scheme and a scanner for its stability region, used both
as a standalone lab and as the oracle for the three-dimensional kernels.

Stencil reaches two cells to each side, so steppers need a 2-cell halo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Adre1dState:
    """Uniform-grid state for the 1D advection-diffusion-reaction stepper.

    alpha may be a constant or a callable alpha(x, t); a time-dependent alpha
    should come with its derivative dalpha_dt(x, t).  bc is "periodic" or
    "dirichlet"; the latter requires `ghost`, a callable g(x, t) supplying
    exact values on the 2-cell halo.
    """

    x: np.ndarray
    dx: float
    q: np.ndarray
    lam: float = 0.0
    alpha: object = 0.0
    dalpha_dt: object = None
    beta: float = 0.0
    t: float = 0.0
    bc: str = "periodic"
    ghost: object = None

    @classmethod
    def on_interval(cls, ncells, a=0.0, b=1.0, **kw):
        dx = (b - a) / ncells
        x = a + dx * (np.arange(ncells) + 0.5)
        q = kw.pop("q", np.zeros(ncells))
        return cls(x=x, dx=dx, q=np.asarray(q, dtype=float), **kw)

    def numbers(self, dt):
        """Courant, diffusion and reaction numbers (c, d, r) for a step dt."""
        alpha_max = self._alpha_values(self.x, self.t).max() if self.x.size else 0.0
        return (
            self.lam * dt / self.dx,
            alpha_max * dt / self.dx**2,
            self.beta * dt,
        )

    def _alpha_values(self, x, t):
        if callable(self.alpha):
            return np.asarray(self.alpha(x, t), dtype=float) * np.ones_like(x)
        return float(self.alpha) * np.ones_like(x)

    def _dalpha_values(self, x, t):
        if self.dalpha_dt is None:
            return np.zeros_like(x)
        return np.asarray(self.dalpha_dt(x, t), dtype=float) * np.ones_like(x)


def _padded(state):
    """State values on a 2-cell halo, plus halo cell centers."""
    q, x, dx = state.q, state.x, state.dx
    xpad = np.concatenate([x[:1] - 2 * dx, x[:1] - dx, x, x[-1:] + dx, x[-1:] + 2 * dx])
    if state.bc == "periodic":
        qpad = np.concatenate([q[-2:], q, q[:2]])
    elif state.bc == "dirichlet":
        if state.ghost is None:
            raise ValueError("dirichlet boundaries need a ghost-value callable")
        g = state.ghost
        left = np.array([g(xpad[0], state.t), g(xpad[1], state.t)], dtype=float)
        right = np.array([g(xpad[-2], state.t), g(xpad[-1], state.t)], dtype=float)
        qpad = np.concatenate([left, q, right])
    else:
        raise ValueError(f"unknown boundary mode {state.bc!r}")
    return qpad, xpad


def lader1d_step(state, dt):
    """One step of the variable-coefficient scheme; returns the next q array.

    Implements the lam > 0 branch; lam < 0 is handled by mirroring the grid.
    With uniform alpha and zero dalpha_dt this reduces exactly to the
    constant-coefficient formula (see `_step_constant_alpha`).
    """
    if state.lam < 0.0:
        mirrored = Adre1dState(
            x=-state.x[::-1],
            dx=state.dx,
            q=state.q[::-1].copy(),
            lam=-state.lam,
            alpha=(lambda x, t: state._alpha_values(-x, t)) if callable(state.alpha) else state.alpha,
            dalpha_dt=None
            if state.dalpha_dt is None
            else (lambda x, t: state._dalpha_values(-x, t)),
            beta=state.beta,
            t=state.t,
            bc=state.bc,
            ghost=None if state.ghost is None else (lambda x, t: state.ghost(-x, t)),
        )
        return lader1d_step(mirrored, dt)[::-1]

    q, xpad = _padded(state)
    dx, lam, beta = state.dx, state.lam, state.beta
    c = lam * dt / dx
    r = beta * dt

    an = state._alpha_values(xpad, state.t)  # alpha at cell centers (halo included)
    ah = 0.5 * (an[:-1] + an[1:])  # alpha at half indices i+1/2
    dah = 0.5 * (
        state._dalpha_values(xpad, state.t)[:-1] + state._dalpha_values(xpad, state.t)[1:]
    )

    D = q[1:] - q[:-1]  # D[k] = q_{k+1} - q_k on the padded grid
    # centred second-difference operator (alpha Delta)_k, defined for k = 1..n+2
    dad = (ah[1:] * D[1:] - ah[:-1] * D[:-1]) / dx**2

    # index maps: cell i of the interior corresponds to padded index i+2
    n = state.q.size
    i = np.arange(2, n + 2)
    D_imh = D[i - 1]  # q_i - q_{i-1}
    D_iph = D[i]  # q_{i+1} - q_i
    D_ip3h = D[i + 1]
    D_im3h = D[i - 2]
    dad_i = dad[i - 1]
    dad_ip1 = dad[i]
    dad_im1 = dad[i - 2]

    k = dt / (2.0 * dx**2)
    adv = (
        D_imh
        + 0.5 * D_imh
        - 0.5 * c * D_iph
        + k * (an[i + 1] * D_ip3h - an[i] * D_imh)
        + 0.5 * r * D_imh
        - 0.5 * D_im3h
        + 0.5 * c * D_imh
        - k * (an[i] * D_iph - an[i - 1] * D_im3h)
    )

    a_plus = ah[i] + 0.5 * dt * dah[i]
    a_minus = ah[i - 1] + 0.5 * dt * dah[i - 1]
    diff = (dt / dx**2) * (
        a_plus * (D_iph + 0.5 * dt * (dad_ip1 - dad_i) + 0.5 * r * D_iph)
        + a_minus * (-D_imh + 0.5 * dt * (dad_im1 - dad_i) - 0.5 * r * D_imh)
    )

    react = r * (q[i] - 0.25 * c * (q[i + 1] - q[i - 1]) + 0.5 * dt * dad_i + 0.5 * r * q[i])

    return q[i] - c * adv + diff + react


def _step_constant_alpha(q, c, d, r):
    """Constant-coefficient update on a periodic array (c >= 0)."""
    qp1 = np.roll(q, -1)
    qm1 = np.roll(q, 1)
    qm2 = np.roll(q, 2)
    qp2 = np.roll(q, -2)
    D_imh = q - qm1
    D2 = qp1 - 2 * q + qm1
    D2p1 = qp2 - 2 * qp1 + q
    D2m1 = q - 2 * qm1 + qm2
    adv = D_imh + 0.5 * D2m1 - 0.5 * c * D2 + 0.5 * d * (D2p1 - D2m1) + 0.5 * r * D_imh
    diff = D2 + 0.5 * d * (D2p1 - 2 * D2 + D2m1) + 0.5 * r * D2
    react = q - 0.25 * c * (qp1 - qm1) + 0.5 * d * D2 + 0.5 * r * q
    return q - c * adv + d * diff + r * react


def amplification_factor(theta, c, d, r):
    """Complex gain of the constant-coefficient scheme on the mode exp(I k theta).

    Arguments broadcast; returns complex ndarray.  A(theta, 0, 0, 0) == 1 and
    A(0, c, d, r) == 1 + r + r^2/2.
    """
    theta, c, d, r = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(c, dtype=float),
        np.asarray(d, dtype=float),
        np.asarray(r, dtype=float),
    )
    e = np.exp(1j * theta)
    em = np.conj(e)
    one = np.ones_like(e)
    D_imh = one - em
    D2 = e - 2 * one + em
    adv = D_imh + 0.5 * D2 * em - 0.5 * c * D2 + 0.5 * d * D2 * (e - em) + 0.5 * r * D_imh
    diff = D2 + 0.5 * d * D2 * (e - 2 * one + em) + 0.5 * r * D2
    react = one - 0.25 * c * (e - em) + 0.5 * d * D2 + 0.5 * r * one
    return one - c * adv + d * diff + r * react


@dataclass
class StabilityOrthotope:
    """Parameter box [0, c_max] x [0, d_max] x [r_min, 0] over theta in [-pi, pi]."""

    c_max: float
    d_max: float
    r_min: float

    def __post_init__(self):
        if not (self.c_max >= 0.0 and self.d_max >= 0.0 and self.r_min <= 0.0):
            raise ValueError("need c_max, d_max >= 0 >= r_min")

    def grid(self, res):
        return (
            np.linspace(0.0, self.c_max, res),
            np.linspace(0.0, self.d_max, res),
            np.linspace(self.r_min, 0.0, res),
        )


def stability_scan(orthotope, res=21, n_theta=256):
    """Sampled max of |A| over the orthotope; returns (max, (theta, c, d, r)).

    The scheme is judged stable on the box when the returned maximum does not
    exceed 1 + 1e-12.
    """
    if res < 3:
        raise ValueError("resolution must be >= 3 per axis")
    cs, ds, rs = orthotope.grid(res)
    thetas = np.linspace(-np.pi, np.pi, n_theta)
    best = -np.inf
    best_sample = None
    for c in cs:  # chunk over c to bound memory
        a = amplification_factor(
            thetas[:, None, None], c, ds[None, :, None], rs[None, None, :]
        )
        mag = np.abs(a)
        idx = np.unravel_index(np.argmax(mag), mag.shape)
        if mag[idx] > best:
            best = float(mag[idx])
            best_sample = (float(thetas[idx[0]]), float(c), float(ds[idx[1]]), float(rs[idx[2]]))
    return best, best_sample


def stability_map_rows(orthotope, res=21, n_theta=256):
    """Rows (c, d, r, max_theta |A|) for CSV emission."""
    cs, ds, rs = orthotope.grid(res)
    thetas = np.linspace(-np.pi, np.pi, n_theta)
    rows = []
    for c in cs:
        a = amplification_factor(
            thetas[:, None, None], c, ds[None, :, None], rs[None, None, :]
        )
        mmax = np.abs(a).max(axis=0)
        for di, d in enumerate(ds):
            for ri, r in enumerate(rs):
                rows.append((float(c), float(d), float(r), float(mmax[di, ri])))
    return rows


def run_periodic(ncells, steps, c, d, r, q0=None, lam=1.0, seed=None):
    """Advance the constant-coefficient scheme on a periodic unit interval.

    The physical coefficients are reconstructed from the dimensionless
    numbers: dt is arbitrary because only (c, d, r) enter the update.
    """
    dx = 1.0 / ncells
    dt = 1.0  # only the dimensionless groups matter for the constant scheme
    if q0 is None:
        rng = np.random.default_rng(seed)
        q0 = rng.standard_normal(ncells)
    q = np.asarray(q0, dtype=float).copy()
    history = np.empty(steps + 1)
    history[0] = np.linalg.norm(q) / np.sqrt(ncells)
    for s in range(steps):
        q = _step_constant_alpha(q, c, d, r)
        history[s + 1] = np.linalg.norm(q) / np.sqrt(ncells)
        if not np.isfinite(history[s + 1]) or history[s + 1] > 1e12 * (history[0] + 1.0):
            history = history[: s + 2]
            break
    return q, history


def fourier_mode_gain(ncells, mode, c, d, r):
    """Per-step amplitude gain of one periodic Fourier mode under the stepper.

    Serves as the simulation oracle for `amplification_factor`.
    """
    x = (np.arange(ncells) + 0.5) / ncells
    theta = 2.0 * np.pi * mode / ncells
    q = np.exp(2j * np.pi * mode * x)
    q1 = _step_constant_alpha(q.real, c, d, r) + 1j * _step_constant_alpha(q.imag, c, d, r)
    coeff = (q1 * np.conj(q)).sum() / (np.abs(q) ** 2).sum()
    return coeff


def convergence_study_1d(exact, ncells_list, t_end, lam, alpha, beta, dt_rule, bc="periodic"):
    """Discrete L2 errors at t_end and pairwise observed orders.

    exact(x, t) supplies both the initial condition and the reference
    solution; dt_rule(dx) fixes the step size per grid (capped to land on
    t_end exactly).
    """
    errors = []
    for ncells in ncells_list:
        state = Adre1dState.on_interval(ncells, 0.0, 1.0, lam=lam, alpha=alpha, beta=beta, bc=bc)
        state.q = np.asarray(exact(state.x, 0.0), dtype=float)
        dt0 = dt_rule(state.dx)
        t = 0.0
        while t < t_end - 1e-14:
            dt = min(dt0, t_end - t)
            state.q = lader1d_step(state, dt)
            t += dt
            state.t = t
        err = state.q - exact(state.x, t_end)
        errors.append(float(np.sqrt(state.dx * np.sum(err**2))))
    orders = [
        float(np.log(errors[k] / errors[k + 1]) / np.log(ncells_list[k + 1] / ncells_list[k]))
        for k in range(len(errors) - 1)
    ]
    return errors, orders
