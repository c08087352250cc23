import numpy as np
import pytest

from fvfe.lader1d import (
    Adre1dState,
    StabilityOrthotope,
    _step_constant_alpha,
    amplification_factor,
    convergence_study_1d,
    fourier_mode_gain,
    lader1d_step,
    run_periodic,
    stability_scan,
)

PAPER_BOX = StabilityOrthotope(0.3, 0.2, -0.5)


def test_constant_state_invariant_without_reaction():
    st = Adre1dState.on_interval(32, lam=0.8, alpha=2e-3, beta=0.0)
    st.q = np.full(32, 2.5)
    assert np.abs(lader1d_step(st, 0.2 * st.dx) - 2.5).max() < 1e-14


def test_constant_state_reaction_factor():
    st = Adre1dState.on_interval(32, lam=0.8, alpha=2e-3, beta=-0.7)
    st.q = np.full(32, 2.5)
    dt = 0.2 * st.dx
    r = st.beta * dt
    got = lader1d_step(st, dt)
    assert np.abs(got - 2.5 * (1 + r + r * r / 2)).max() < 1e-14


def test_variable_alpha_path_degenerates_to_constant_formula():
    rng = np.random.default_rng(5)
    st = Adre1dState.on_interval(64, lam=0.7, alpha=3e-3, beta=-0.4)
    st.q = rng.standard_normal(64)
    dt = 0.2 * st.dx
    c, d, r = st.numbers(dt)
    assert np.abs(lader1d_step(st, dt) - _step_constant_alpha(st.q, c, d, r)).max() < 1e-13


def test_time_dependent_alpha_enters_through_its_derivative():
    rng = np.random.default_rng(6)
    q0 = rng.standard_normal(48)
    base = Adre1dState.on_interval(48, lam=0.5, beta=0.0, q=q0.copy(),
                                   alpha=lambda x, t: 2e-3 + 1e-3 * np.sin(2 * np.pi * x))
    withdt = Adre1dState.on_interval(48, lam=0.5, beta=0.0, q=q0.copy(),
                                     alpha=lambda x, t: 2e-3 + 1e-3 * np.sin(2 * np.pi * x),
                                     dalpha_dt=lambda x, t: 0.5e-3 * np.cos(2 * np.pi * x))
    dt = 0.2 * base.dx
    a, b = lader1d_step(base, dt), lader1d_step(withdt, dt)
    assert np.abs(a - b).max() > 0  # the derivative term participates


def test_dirichlet_requires_ghosts():
    st = Adre1dState.on_interval(16, lam=1.0, bc="dirichlet")
    with pytest.raises(ValueError, match="ghost"):
        lader1d_step(st, 1e-3)


def test_negative_speed_mirrors_positive():
    f = lambda x: np.sin(2 * np.pi * x) + 0.3 * np.cos(6 * np.pi * x)
    plus = Adre1dState.on_interval(64, lam=1.0, alpha=1e-3, beta=-0.2)
    plus.q = f(plus.x)
    minus = Adre1dState.on_interval(64, lam=-1.0, alpha=1e-3, beta=-0.2)
    minus.q = f(minus.x)[::-1].copy()
    dt = 0.2 * plus.dx
    assert np.abs(lader1d_step(plus, dt) - lader1d_step(minus, dt)[::-1]).max() < 1e-14


def test_amplification_factor_trivial_values():
    thetas = np.linspace(-np.pi, np.pi, 17)
    assert np.abs(amplification_factor(thetas, 0.0, 0.0, 0.0) - 1.0).max() < 1e-14
    for c, d, r in [(0.2, 0.1, -0.3), (0.3, 0.2, -0.5)]:
        a0 = amplification_factor(0.0, c, d, r)
        assert abs(a0 - (1 + r + r * r / 2)) < 1e-14


def test_amplification_factor_matches_simulation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        c = rng.uniform(0, 0.3)
        d = rng.uniform(0, 0.2)
        r = rng.uniform(-0.5, 0)
        mode = rng.integers(1, 32)
        theta = 2 * np.pi * mode / 64
        gain = fourier_mode_gain(64, int(mode), c, d, r)
        assert abs(gain - complex(amplification_factor(theta, c, d, r))) < 1e-10


def test_stability_scan_paper_orthotope():
    mx, sample = stability_scan(PAPER_BOX, res=11, n_theta=128)
    assert mx <= 1.0 + 1e-12
    assert len(sample) == 4


def test_stability_scan_detects_instability():
    a = np.abs(amplification_factor(np.linspace(-np.pi, np.pi, 128), 1.5, 0.0, 0.0)).max()
    assert a > 1.0
    mx, _ = stability_scan(StabilityOrthotope(1.5, 0.0, 0.0), res=3, n_theta=128)
    assert mx > 1.0


def test_stability_scan_resolution_guard():
    with pytest.raises(ValueError):
        stability_scan(PAPER_BOX, res=2)


def test_long_run_bounded_inside_box_unbounded_outside():
    rng = np.random.default_rng(4)
    for _ in range(5):
        c = rng.uniform(0.01, 0.3)
        d = rng.uniform(0.01, 0.2)
        r = rng.uniform(-0.5, -0.01)
        _, hist = run_periodic(64, 1000, c, d, r, seed=1)
        assert hist[-1] <= hist[0] * (1 + 1e-10)
    _, hist = run_periodic(64, 1000, 1.5, 0.0, 0.0, seed=1)
    assert hist[-1] > 1e6 * hist[0]


def test_convergence_orders():
    k = 2 * np.pi
    lam, alpha, beta = 1.0, 1e-3, -1.0
    exact = lambda x, t: np.exp((-alpha * k**2 + beta) * t) * np.cos(k * (x - lam * t))
    _, orders = convergence_study_1d(exact, [32, 64, 128, 256], 1.0, lam, alpha, beta, lambda dx: 0.25 * dx)
    assert min(orders) >= 1.8

    adv = lambda x, t: np.cos(k * (x - t))
    _, orders = convergence_study_1d(adv, [32, 64, 128, 256], 1.0, 1.0, 0.0, 0.0, lambda dx: 0.25 * dx)
    assert min(orders) >= 1.8

    dif = lambda x, t: np.exp(-alpha * k**2 * t) * np.cos(k * x)
    _, orders = convergence_study_1d(dif, [32, 64, 128], 1.0, 0.0, alpha, 0.0, lambda dx: 0.15 * dx * dx / alpha)
    assert min(orders) >= 1.8


def test_pure_reaction_is_second_order_in_dt():
    # constant-in-x data: error comes from the (1 + r + r^2/2) time quadrature only
    beta = -1.0
    errs = []
    for nsteps in (8, 16, 32):
        st = Adre1dState.on_interval(8, lam=0.0, alpha=0.0, beta=beta)
        st.q = np.full(8, 1.0)
        dt = 1.0 / nsteps
        for _ in range(nsteps):
            st.q = lader1d_step(st, dt)
        errs.append(abs(st.q[0] - np.exp(beta)))
    orders = [np.log(errs[a] / errs[a + 1]) / np.log(2) for a in range(2)]
    assert min(orders) >= 1.8


def test_zero_coefficients_are_exact():
    rng = np.random.default_rng(2)
    st = Adre1dState.on_interval(32, lam=0.0, alpha=0.0, beta=0.0)
    st.q = rng.standard_normal(32)
    assert np.array_equal(lader1d_step(st, 0.37), st.q)
