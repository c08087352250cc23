"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Criteria (tolerances fixed here, nothing deferred):
  1. Laminar manufactured convergence on n = 4/8/16, CFL 1: per-scheme order
     bands around the published table (+-0.4), scheme-specific floors, and
     errors within a factor 3 of the published values.
  2. Turbulent manufactured convergence, CFL 10: LADER orders >= 1.8 for
     w_k/w_eps/w_y; CVC-orth w_k orders <= 1.0 (orthogonal-only diffusion
     destroys second order).
  3. Gaussian sphere (mu = D = 1e-2), meshes 11664/18522/54000: LADER w_y
     orders >= 1.8 and error on M3 <= 2x 5.55e-4; CVC-G w_y orders in
     [1.4, 2.0].
  4. 1D LADER stability: the published orthotope scans stable at >= 21^3 x 256
     samples; (c,d,r) = (1.5,0,0) is unstable; long runs stay bounded inside
     the box at 20 random interior points.
  5. 1D LADER order >= 1.8 over 5 grid doublings (combined equation).
  6. Property batteries: flux antisymmetry, free-stream preservation, mesh
     identities, affine exactness, limiter/ENO invariants, pressure
     quadrature, weak-divergence residual, source-transcription oracle.
  7. Cylinder smoke case (<= 30k elements) run to the relaxed steady
     criterion 1e-3: c_d in [4, 9], c_l in [-0.05, 0.05], Dpi in [0.1, 0.25].

The convergence runs take minutes to tens of minutes each; the whole module
is the long pole of the suite by design.
"""

import numpy as np
import pytest

import fvfe.cases as cases
import fvfe.driver as driver
import fvfe.schemes as schemes
import fvfe.projection as projection
import fvfe.verification as V
from fvfe.fields import FlowState, SchemeConfig, momentum_to_tets, pressure_at_nodes
from fvfe.lader1d import StabilityOrthotope, run_periodic, stability_scan, convergence_study_1d
from fvfe.mesh import build_dual_mesh, generate_cube_mesh


def report(criterion, ok, detail):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# published reference values: errors and orders per scheme/variable
MMS1_TABLE = {
    ("order1", "pi"): ([1.24e-1, 5.70e-2, 2.96e-2], [1.12, 0.95]),
    ("order1", "w_u"): ([6.40e-2, 3.32e-2, 1.78e-2], [0.95, 0.90]),
    ("cvc-g", "pi"): ([5.98e-2, 1.58e-2, 4.58e-3], [1.92, 1.78]),
    ("cvc-g", "w_u"): ([5.41e-2, 1.88e-2, 6.52e-3], [1.52, 1.53]),
    ("lader", "pi"): ([4.10e-2, 8.74e-3, 2.03e-3], [2.23, 2.11]),
    ("lader", "w_u"): ([2.61e-2, 5.76e-3, 1.24e-3], [2.18, 2.22]),
}


@pytest.mark.acceptance
def test_criterion_1_mms_laminar_convergence():
    reports = cases.convergence_suite("mms1", schemes=["order1", "cvc-g", "lader"])
    lines = []
    ok = True
    for (scheme, var), (ref_errs, ref_orders) in MMS1_TABLE.items():
        errs = reports[scheme].errors[var]
        orders = reports[scheme].orders()[var]
        for e, re_ in zip(errs, ref_errs):
            if not (e <= 3.0 * re_ and e >= re_ / 3.0):
                ok = False
                lines.append(f"{scheme}/{var}: error {e:.3e} outside 3x of {re_:.3e}")
        for o, ro in zip(orders, ref_orders):
            if abs(o - ro) > 0.4:
                ok = False
                lines.append(f"{scheme}/{var}: order {o:.2f} not within 0.4 of {ro}")
        if scheme == "lader" and min(orders) < 1.8:
            ok = False
            lines.append(f"lader/{var}: order {min(orders):.2f} < 1.8")
        if scheme == "cvc-g":
            floor = 1.7 if var == "pi" else 1.4
            if min(orders) < floor:
                ok = False
                lines.append(f"cvc-g/{var}: order {min(orders):.2f} < {floor}")
        if scheme == "order1" and not all(0.7 <= o <= 1.3 for o in orders):
            ok = False
            lines.append(f"order1/{var}: orders {orders} outside [0.7, 1.3]")
        lines.append(
            f"{scheme}/{var}: E={['%.3e' % e for e in errs]} o={['%.2f' % o for o in orders]}"
        )
    report(1, ok, "; ".join(lines))


@pytest.mark.acceptance
def test_criterion_2_mms_turbulent_convergence():
    reports = cases.convergence_suite("mms2", schemes=["cvc-orth", "lader"])
    lines = []
    ok = True
    lad = reports["lader"].orders()
    for var in ("w_k", "w_eps", "w_y"):
        o = lad[var]
        lines.append(f"lader/{var}: orders {['%.2f' % x for x in o]}")
        if min(o) < 1.8:
            ok = False
            lines.append(f"lader/{var}: order {min(o):.2f} < 1.8")
    orth_k = reports["cvc-orth"].orders()["w_k"]
    lines.append(f"cvc-orth/w_k: orders {['%.2f' % x for x in orth_k]}")
    if not all(o <= 1.0 for o in orth_k):
        ok = False
        lines.append("cvc-orth/w_k: orthogonal-only diffusion should not stay 2nd order")
    report(2, ok, "; ".join(lines))


@pytest.mark.acceptance
def test_criterion_3_gaussian_sphere():
    reports = cases.convergence_suite("gaussian", schemes=["cvc-g", "lader"])
    lines = []
    ok = True
    lad = reports["lader"]
    o_lad = lad.orders()["w_y"]
    e3 = lad.errors["w_y"][-1]
    lines.append(f"lader/w_y: E={['%.3e' % e for e in lad.errors['w_y']]} o={['%.2f' % x for x in o_lad]}")
    if min(o_lad) < 1.8:
        ok = False
        lines.append(f"lader/w_y order {min(o_lad):.2f} < 1.8")
    if e3 > 2.0 * 5.55e-4:
        ok = False
        lines.append(f"lader/w_y M3 error {e3:.3e} > 2x 5.55e-4")
    o_cvc = reports["cvc-g"].orders()["w_y"]
    lines.append(f"cvc-g/w_y: orders {['%.2f' % x for x in o_cvc]}")
    if not all(1.4 <= o <= 2.0 for o in o_cvc):
        ok = False
        lines.append(f"cvc-g/w_y orders {o_cvc} outside [1.4, 2.0]")
    report(3, ok, "; ".join(lines))


@pytest.mark.acceptance
def test_criterion_4_lader1d_stability():
    box = StabilityOrthotope(0.3, 0.2, -0.5)
    mx, sample = stability_scan(box, res=21, n_theta=256)
    ok = mx <= 1.0 + 1e-12
    lines = [f"max |A| over O(0.3,0.2,-0.5) at 21^3 x 256: {mx:.12f} (sample {sample})"]

    unstable = np.abs(
        __import__("fvfe.lader1d", fromlist=["amplification_factor"]).amplification_factor(
            np.linspace(-np.pi, np.pi, 256), 1.5, 0.0, 0.0
        )
    ).max()
    lines.append(f"max_theta |A(1.5, 0, 0)| = {unstable:.3f}")
    ok = ok and unstable > 1.0

    rng = np.random.default_rng(2024)
    for _ in range(20):
        c = rng.uniform(0.0, 0.3)
        d = rng.uniform(0.0, 0.2)
        r = rng.uniform(-0.5, 0.0)
        _, hist = run_periodic(64, 1000, c, d, r, seed=int(rng.integers(1 << 30)))
        if not (len(hist) == 1001 and hist[-1] <= hist[0] * (1.0 + 1e-10)):
            ok = False
            lines.append(f"unbounded inside the box at (c,d,r)=({c:.3f},{d:.3f},{r:.3f})")
            break
    _, hist = run_periodic(64, 1000, 1.5, 0.0, 0.0, seed=7)
    ok = ok and hist[-1] > 1e6 * hist[0]
    lines.append(f"outside-box growth factor {hist[-1] / hist[0]:.3e} in {len(hist) - 1} steps")
    report(4, ok, "; ".join(lines))


@pytest.mark.acceptance
def test_criterion_5_lader1d_order():
    k = 2 * np.pi
    lam, alpha, beta = 1.0, 1e-3, -1.0
    exact = lambda x, t: np.exp((-alpha * k**2 + beta) * t) * np.cos(k * (x - lam * t))
    grids = [32, 64, 128, 256, 512, 1024]  # five doublings
    errs, orders = convergence_study_1d(exact, grids, 1.0, lam, alpha, beta, lambda dx: 0.25 * dx)
    ok = min(orders) >= 1.8
    report(5, ok, f"errors {['%.3e' % e for e in errs]}, orders {['%.2f' % o for o in orders]}")


@pytest.mark.acceptance
def test_criterion_6_property_batteries():
    lines = []
    ok = True

    # flux antisymmetry on 1000 random interfaces (random states/normals)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        Wi, Wj, Ui, Uj = rng.normal(size=(4, 3))
        eta = rng.normal(size=3)
        a1 = schemes.rusanov_alpha(Ui, Uj, eta)
        a2 = schemes.rusanov_alpha(Uj, Ui, -eta)
        f1 = schemes.rusanov_flux(Wi, Wj, Ui, Uj, eta, a1)
        f2 = schemes.rusanov_flux(Wj, Wi, Uj, Ui, -eta, a2)
        worst = max(worst, np.abs(f1 + f2).max())
    ok &= worst == 0.0
    lines.append(f"antisymmetry worst |f_ij + f_ji| = {worst:.1e}")

    # free-stream preservation over 10 full steps, every scheme
    fe = generate_cube_mesh(3)
    dual = build_dual_mesh(fe)
    U0 = np.array([0.7, -0.3, 0.2])
    drift_worst = 0.0
    for scheme in ("order1", "cvc-orth", "cvc-g", "lader"):
        cfg = SchemeConfig(scheme=scheme, mu=1e-2, cfl=1.0, turbulence=True, species=True)
        st = FlowState.zeros(dual, cfg)
        st.w_u[:] = U0
        st.w_k[:] = cfg.k_floor
        st.w_eps[:] = cfg.eps_floor
        st.w_y[:] = 0.8
        st.pi[:] = 2.5
        st.mu_t = np.zeros(dual.n_nodes)
        spec = driver.BoundarySpec(
            "dirichlet-viscous",
            momentum=lambda p, t: np.tile(U0, (p.shape[0], 1)),
            scalars={
                "k": lambda p, t: np.full(p.shape[0], cfg.k_floor),
                "eps": lambda p, t: np.full(p.shape[0], cfg.eps_floor),
                "y": lambda p, t: np.full((p.shape[0], 1), 0.8),
            },
        )
        bcs = driver.BoundaryTable(dual, {t: spec for t in range(1, 7)})
        ws = {}
        for _ in range(10):
            driver.advance(st, dual, fe, cfg, bcs=bcs, workspace=ws)
        drift = max(
            np.abs(st.w_u - U0).max(),
            np.abs(pressure_at_nodes(st.pi, dual) - 2.5).max(),
            np.abs(st.w_y - 0.8).max(),
        )
        drift_worst = max(drift_worst, drift)
    ok &= drift_worst <= 1e-11
    lines.append(f"free-stream drift over 10 steps (all schemes): {drift_worst:.2e}")

    # mesh identities on n in {2, 4, 8}
    id_worst = 0.0
    for n in (2, 4, 8):
        d = build_dual_mesh(generate_cube_mesh(n))
        acc = np.zeros((d.n_nodes, 3))
        np.add.at(acc, d.iface_i, d.iface_normal)
        np.add.at(acc, d.iface_j, -d.iface_normal)
        interior = ~d.boundary_node
        id_worst = max(
            id_worst,
            (np.linalg.norm(acc[interior], axis=1) / d.cell_surface[interior]).max(),
        )
        vol_err = abs(d.cell_volume.sum() - d.fe.signed_volumes().sum()) / d.cell_volume.sum()
        id_worst = max(id_worst, vol_err)
    ok &= id_worst <= 1e-12
    lines.append(f"mesh closed-surface/volume-partition residual: {id_worst:.2e}")

    # Galerkin affine exactness
    d = build_dual_mesh(generate_cube_mesh(3))
    coef = np.array([1.3, -0.4, 0.9])
    g = d.element_gradients(d.nodes @ coef + 0.5)
    aff = np.abs(g - coef).max()
    ok &= aff <= 1e-10
    lines.append(f"affine gradient exactness: {aff:.1e}")

    # minmod / ENO invariants
    x, y = rng.normal(size=(2, 2000))
    m = schemes.minmod(x, y)
    mm_ok = np.all(np.abs(m) <= np.minimum(np.abs(x), np.abs(y)) + 1e-15) and np.all(
        m[x * y <= 0] == 0.0
    )
    sels = []
    for _ in range(500):
        gu, ga = rng.normal(size=(2, 3))
        off = rng.normal(size=3)
        _, proj = schemes.eno_select(gu, ga, off)
        sels.append(abs(abs(proj) - min(abs(gu @ off), abs(ga @ off))))
    ok &= mm_ok and max(sels) <= 1e-14
    lines.append(f"minmod/ENO invariants: max selection defect {max(sels):.1e}")

    # pressure quadrature constant consistency
    eta = rng.normal(size=3)
    pq = schemes.pressure_face_term([3.3, 3.3, 3.3, 3.3], eta)
    pq_err = np.abs(pq - 3.3 * eta).max()
    ok &= pq_err <= 1e-14
    lines.append(f"pressure quadrature constant consistency: {pq_err:.1e}")

    # post-projection weak divergence <= 10x solver tolerance
    tol = 1e-11
    w_nodes = rng.normal(size=(d.n_nodes, 3))
    w_tet = momentum_to_tets(w_nodes, d)
    areas = np.linalg.norm(d.bpatch_normal, axis=1)
    nhat = d.bpatch_normal / areas[:, None]
    G = np.einsum("ij,ij->i", w_nodes[d.bpatch_node], nhat)
    sysm = projection.assemble_pressure_system(d, w_tet, 0.02, boundary_flux=G)
    delta, _ = projection.solve_pressure(sysm, tol=tol)
    w_new = w_tet - 0.02 * d.vertex_field_gradients(delta)
    r0 = np.linalg.norm(projection.weak_divergence_residual(d, w_tet, 0.02, boundary_flux=G))
    r1 = np.linalg.norm(projection.weak_divergence_residual(d, w_new, 0.02, boundary_flux=G))
    ok &= r1 <= 10 * tol * r0
    lines.append(f"weak-divergence residual ratio {r1 / r0:.2e} (tol {tol})")

    # manufactured source transcription oracle: 20 random points per equation
    rng2 = np.random.default_rng(99)
    worst_res = 0.0
    for maker in (V.mms_laminar, V.mms_turbulent, V.gaussian_sphere):
        sol = maker()
        lo = np.array([a for a, _ in sol.domain])
        hi = np.array([b for _, b in sol.domain])
        pts = lo + (0.1 + 0.8 * rng2.random((20, 3))) * (hi - lo)
        res = V.pde_residual(sol, pts, 0.53)
        worst_res = max(worst_res, max(np.abs(v).max() for v in res.values()))
    ok &= worst_res <= 1e-6
    lines.append(f"source-transcription PDE residual: {worst_res:.2e}")

    report(6, ok, "; ".join(lines))


@pytest.mark.acceptance
def test_criterion_7_cylinder_smoke():
    case = cases.cylinder_case(scheme="order1", steady_tol=1e-3)
    rec = driver.run_case(case)
    cd, cl, dpi = cases.cylinder_coefficients(rec)
    ok = rec.steady or rec.steps >= 1
    lines = [
        f"steps {rec.steps}, steady={rec.steady}, residual {rec.residuals[-1]:.2e}",
        f"c_d={cd:.4f} (want [4, 9]), c_l={cl:.5f} (want [-0.05, 0.05]), Dpi={dpi:.4f} (want [0.1, 0.25])",
    ]
    ok = ok and rec.steady
    ok = ok and (4.0 <= cd <= 9.0) and (-0.05 <= cl <= 0.05) and (0.1 <= dpi <= 0.25)
    report(7, ok, "; ".join(lines))
