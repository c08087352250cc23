import numpy as np
import pytest

from fvfe.driver import initial_state
from fvfe.fields import FlowState, SchemeConfig
from fvfe.mesh import build_dual_mesh, generate_cube_mesh
from fvfe.schemes import (
    eno_select,
    kolgan_flux,
    kolgan_slopes,
    lader_evolve_flux_states,
    lader_flux,
    minmod,
    pressure_face_term,
    rusanov_alpha,
    rusanov_flux,
    transport_diffusion_step,
    viscous_flux_galerkin,
    viscous_flux_orthogonal,
)


@pytest.fixture(scope="module")
def dual():
    return build_dual_mesh(generate_cube_mesh(3))


def test_rusanov_alpha_examples():
    eta = np.array([1.0, 0.0, 0.0])
    # U_i.eta = 1, U_j.eta = -2
    assert rusanov_alpha([1, 0, 0], [-2, 0, 0], eta, "coupled", "momentum") == 4.0
    assert rusanov_alpha([0, 0, 0], [0, 0, 0], eta) == 0.0
    assert rusanov_alpha([1, 0, 0], [-2, 0, 0], eta, "decoupled", "scalar") == 2.0
    assert rusanov_alpha([1, 0, 0], [-2, 0, 0], eta, "coupled", "scalar") == 4.0


def test_rusanov_flux_examples():
    eta = np.array([2.0, 0.0, 0.0])
    W = np.array([3.0, 1.0, -1.0])
    U = np.array([0.5, 0.0, 0.0])
    # identical states: pure centred flux, no dissipation regardless of alpha
    f = rusanov_flux(W, W, U, U, eta, alpha=7.0)
    assert np.allclose(f, (U @ eta) * W)
    # hand evaluation: W_i=1, W_j=0, U.eta = 1 both sides, alpha = 2
    f = rusanov_flux(1.0, 0.0, [1, 0, 0], [1, 0, 0], [1.0, 0, 0], alpha=2.0)
    assert f == pytest.approx(0.5 * (1 + 0) - 0.5 * 2 * (0 - 1))
    assert f == pytest.approx(1.5)


def test_rusanov_flux_antisymmetry():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        Wi, Wj = rng.normal(size=(2, 3))
        Ui, Uj = rng.normal(size=(2, 3))
        eta = rng.normal(size=3)
        alpha = rusanov_alpha(Ui, Uj, eta)
        f1 = rusanov_flux(Wi, Wj, Ui, Uj, eta, alpha)
        f2 = rusanov_flux(Wj, Wi, Uj, Ui, -eta, rusanov_alpha(Uj, Ui, -eta))
        assert np.array_equal(f1, -f2)


def test_minmod():
    assert minmod(0.5, 2.0) == 0.5
    assert minmod(-0.5, -2.0) == -0.5
    assert minmod(0.5, -2.0) == 0.0
    assert minmod(0.0, 3.0) == 0.0
    a = np.array([1.0, -1.0, 2.0])
    b = np.array([3.0, -0.5, -1.0])
    assert np.allclose(minmod(a, b), [1.0, -0.5, 0.0])
    # magnitude never exceeds either argument
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(2, 1000))
    m = minmod(x, y)
    assert np.all(np.abs(m) <= np.minimum(np.abs(x), np.abs(y)) + 1e-15)


def test_kolgan_slopes():
    internode = np.array([1.0, 0.0, 0.0])
    # constant field: zero jump and zero gradients -> zero slopes
    dL, dR = kolgan_slopes(np.zeros(3), np.zeros(3), internode, 0.0)
    assert dL == 0.0 and dR == 0.0
    # opposite signs -> limited to zero
    dL, _ = kolgan_slopes(np.array([2.0, 0, 0]), np.zeros(3), internode, -1.0)
    assert dL == 0.0
    # same sign: the smaller magnitude wins; projection carries the 1/2
    dL, _ = kolgan_slopes(np.array([1.0, 0, 0]), np.zeros(3), internode, 2.0)
    assert dL == pytest.approx(0.5)


def test_kolgan_flux_degenerates_to_rusanov():
    eta = np.array([0.7, -0.2, 0.1])
    Wi = np.array([1.0, 2.0, -1.0])
    Wj = np.array([0.5, 1.0, 0.0])
    Ui, Uj = Wi.copy(), Wj.copy()
    f_kol = kolgan_flux(Wi, Wj, Wi, Wj, Ui, Uj, eta)
    alpha = rusanov_alpha(Ui, Uj, eta, "decoupled", "momentum")
    f_rus = rusanov_flux(Wi, Wj, Ui, Uj, eta, alpha)
    assert np.allclose(f_kol, f_rus)


def test_kolgan_flux_constant_field():
    eta = np.array([0.0, 1.0, 0.0])
    W = np.array([2.0, 0.0, 0.0])
    f = kolgan_flux(W, W, W, W, W, W, eta)
    assert np.allclose(f, (W @ eta) * W)


def test_eno_select_minimal_projection():
    rng = np.random.default_rng(2)
    for _ in range(200):
        gu, ga = rng.normal(size=(2, 3))
        off = rng.normal(size=3)
        grad, proj = eno_select(gu, ga, off)
        assert abs(proj) == pytest.approx(min(abs(gu @ off), abs(ga @ off)))
    # tie keeps the upwind candidate
    gu = np.array([1.0, 0.0, 0.0])
    ga = np.array([-1.0, 5.0, 0.0])
    off = np.array([1.0, 0.0, 0.0])
    grad, _ = eno_select(gu, ga, off)
    assert np.allclose(grad, gu)
    # clearly smaller upwind projection wins
    grad, _ = eno_select(0.1 * gu, 0.5 * gu, off)
    assert np.allclose(grad, 0.1 * gu)


def test_lader_evolution_identity_cases():
    # dt = 0: evolved states equal the reconstructed ones
    WL, WR = lader_evolve_flux_states(1.2, 0.8, 0.5, 0.7, 0.0, 0.0, dist=0.1, dt=0.0)
    assert WL == 1.2 and WR == 0.8
    # constant field: node fluxes and gradient fluxes coincide -> no correction
    WL, WR = lader_evolve_flux_states(2.0, 2.0, 0.9, 0.9, 0.3, 0.3, dist=0.1, dt=0.05)
    assert WL == 2.0 and WR == 2.0
    # both sides share the same correction
    WL, WR = lader_evolve_flux_states(1.0, 2.0, 0.2, 0.6, 0.0, 0.1, dist=0.1, dt=0.05)
    assert WL - 1.0 == pytest.approx(WR - 2.0)
    with pytest.raises(Exception):
        lader_evolve_flux_states(1.0, 2.0, 0.2, 0.6, 0.0, 0.1, dist=0.0, dt=0.05)


def test_lader_flux_degeneration():
    eta = np.array([0.3, 0.4, 0.0])
    Wi = np.array([1.0, -0.5, 0.2])
    Wj = np.array([0.7, 0.1, 0.0])
    f_lader = lader_flux(Wi, Wj, Wi, Wj, eta)
    f_rus = rusanov_flux(Wi, Wj, Wi, Wj, eta, rusanov_alpha(Wi, Wj, eta))
    assert np.allclose(f_lader, f_rus)
    assert np.allclose(lader_flux(Wi, Wi, np.zeros(3), np.zeros(3), eta), 0.0)


def test_viscous_flux_galerkin():
    eta = np.array([0.5, 0.2, -0.1])
    # affine U with mu_t = 0: exactly mu * gradU . eta
    gradU = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 3.0], [2.0, 0.0, 1.0]])
    mu = 1e-2
    f = viscous_flux_galerkin(gradU, eta, mu)
    assert np.allclose(f, mu * gradU @ eta)
    # scalar constant field: zero
    assert np.allclose(viscous_flux_galerkin(np.zeros(3), eta, 0.3), 0.0)
    # k-term: -(1/3)(Wk_i + Wk_j) eta
    f = viscous_flux_galerkin(np.zeros((3, 3)), eta, mu, k_pair=(0.6, 1.2))
    assert np.allclose(f, -(1.8 / 3.0) * eta)


def test_viscous_coefficient_is_pair_mean(dual):
    cfg = SchemeConfig(scheme="cvc-g", mu=0.1, turbulence=True, species=False)
    st = FlowState.zeros(dual, cfg)
    st.w_k[:] = 1.0
    st.w_eps[:] = 1.0
    st.mu_t = np.zeros(dual.n_nodes)
    # coefficient (mu + mu_t_ij) with mu_t averaged: exercised via the column helper
    from fvfe.schemes import column_diffusivities, pack_state

    st.mu_t[:] = 0.2
    st.mu_t[1] = 0.4
    _, layout = pack_state(st, cfg)
    alpha = column_diffusivities(st, cfg, layout)
    pair = 0.5 * (alpha[0, 0] + alpha[1, 0])
    assert pair == pytest.approx(0.1 + 0.3)


def test_viscous_flux_orthogonal():
    # constant field: zero
    assert viscous_flux_orthogonal(1.0, 1.0, 0.5, 2.0, 0.1) == 0.0
    # linear along the internode line with eta parallel: exact
    coeff, dist, area = 0.3, 0.25, 1.7
    Wi, Wj = 1.0, 2.0
    f = viscous_flux_orthogonal(Wi, Wj, dist, area, coeff)
    assert f == pytest.approx(coeff * (Wj - Wi) / dist * area)


def test_pressure_face_term():
    eta = np.array([1.0, 2.0, 3.0])
    assert np.allclose(pressure_face_term([4.0, 4.0, 4.0, 4.0], eta), 4.0 * eta)
    assert np.allclose(pressure_face_term([0.0, 0.0, 0.0, 0.0], eta), 0.0)
    assert np.allclose(pressure_face_term([1.0, 1.0, 0.0, 0.0], eta), (5.0 / 6.0) * eta)


def _constant_state(dual, cfg, U0, kval=0.3, eval_=1.1, yval=0.8, pival=2.0):
    st = FlowState.zeros(dual, cfg)
    st.w_u[:] = U0
    if cfg.turbulence:
        st.w_k[:] = kval
        st.w_eps[:] = eval_
        st.mu_t = np.full(dual.n_nodes, 0.05)
    if cfg.species:
        st.w_y[:] = yval
    st.pi[:] = pival
    return st


@pytest.mark.parametrize("scheme", ["order1", "cvc-orth", "cvc-g", "lader"])
def test_transport_free_stream_preservation(dual, scheme):
    cfg = SchemeConfig(scheme=scheme, mu=3e-2, turbulence=True, species=True)
    U0 = np.array([0.9, -0.4, 0.25])
    st = _constant_state(dual, cfg, U0)
    dt = 5e-3
    out = transport_diffusion_step(st, dual, cfg, dt)
    assert np.abs(out["w_u"] - U0).max() <= 1e-12 * np.abs(U0).max()
    assert np.abs(out["w_k"] - 0.3).max() <= 1e-12
    assert np.abs(out["w_eps"] - 1.1).max() <= 1e-12
    assert np.abs(out["w_y"] - 0.8).max() <= 1e-12


def test_degeneration_chain(dual):
    """LADER with dt->0 and zero gradients == CVC with zero slopes == Rusanov."""
    rng = np.random.default_rng(7)
    # a linear-free field: random constants per node would give nonzero slopes,
    # so compare the schemes on the same state with minmod/ENO forced trivial by
    # using a globally affine field (exact gradients, reconstructions meet).
    U0 = np.array([0.4, 0.1, -0.2])
    cfg1 = SchemeConfig(scheme="order1", mu=0.0)
    cfg2 = SchemeConfig(scheme="cvc-g", mu=0.0)
    cfg3 = SchemeConfig(scheme="lader", mu=0.0)
    st = FlowState.zeros(dual, cfg1)
    st.w_u[:] = U0
    st.pi[:] = 0.0
    dt = 0.0
    outs = [transport_diffusion_step(st, dual, c, dt)["w_u"] for c in (cfg1, cfg2, cfg3)]
    assert np.allclose(outs[0], outs[1], atol=1e-14)
    assert np.allclose(outs[0], outs[2], atol=1e-14)


def test_transport_conserves_interior_totals(dual):
    # fluxes cancel pairwise: total change equals the boundary-patch inflow only
    cfg = SchemeConfig(scheme="lader", mu=1e-2, turbulence=True, species=True)
    rng = np.random.default_rng(3)
    st = _constant_state(dual, cfg, np.array([0.5, 0.0, 0.0]))
    st.w_u += 0.05 * rng.normal(size=st.w_u.shape)
    st.w_k += 0.05 * rng.random(dual.n_nodes)
    st.w_y += 0.05 * rng.normal(size=st.w_y.shape)
    dt = 1e-3
    out = transport_diffusion_step(st, dual, cfg, dt)
    # recompute the boundary contribution by summing the cell updates: the
    # interior interface contributions must cancel in the volume-weighted sum
    vol = dual.cell_volume
    change = ((out["w_k"] - st.w_k) * vol).sum() / dt
    # boundary patches use zero-gradient ghosts: flux = (U.eta_b) W
    U = st.w_u / cfg.rho
    bn = dual.bpatch_node
    unb = np.einsum("ij,ij->i", U[bn], dual.bpatch_normal)
    expect = -(unb * st.w_k[bn]).sum()
    assert change == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_divergence_detection(dual):
    cfg = SchemeConfig(scheme="order1", mu=1e-2)
    st = FlowState.zeros(dual, cfg)
    st.w_u[:] = np.nan
    from fvfe.errors import DivergenceDetectedError

    with pytest.raises(DivergenceDetectedError):
        transport_diffusion_step(st, dual, cfg, 1e-3)
