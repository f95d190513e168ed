import time

import numpy as np
import pytest
import sympy as sp

import oracle
from conftest import spacetime
from brinkmann.errors import BrinkmannError
from brinkmann.geodesics import (
    GeodesicState,
    IntegratorConfig,
    clairaut,
    completeness_scan,
    energy,
    fit_blowup,
    geodesic_rhs,
    integrate_batch,
    integrate_geodesic,
    mechanical_form,
)


def run(key, p, v, T, cfg=None, **params):
    return integrate_geodesic(spacetime(key, **params), GeodesicState(np.array(p, float), np.array(v, float)), T, cfg)


# -- right-hand side ----------------------------------------------------------------


def test_rhs_minkowski():
    out = geodesic_rhs(spacetime("minkowski"), GeodesicState(np.array([1.0, 2, 3]), np.array([0.5, -1, 2])))
    assert np.array_equal(out[3:], np.zeros(3))


def test_rhs_clifton_pohl():
    out = geodesic_rhs(spacetime("clifton_pohl"), GeodesicState(np.array([1.0, 0]), np.array([1.0, 0])))
    assert out[2:] == pytest.approx([2.0, 0.0], abs=1e-14)


def test_rhs_rosen_u_acceleration_exact_zero():
    st = spacetime("rosen_torus")
    rng = np.random.default_rng(0)
    for p in st.sample_points(50, seed=3):
        out = geodesic_rhs(st, GeodesicState(p, rng.normal(size=4)))
        assert out[4] == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(min_step=1.0, max_step=0.5)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)


# -- single trajectories ----------------------------------------------------------------


def test_clifton_pohl_escape():
    tr = run("clifton_pohl", [1, 0], [1, 0], 5.0)
    assert tr.verdict.kind == "escape"
    assert abs(tr.verdict.t_star - 1.0) < 1e-3
    assert tr.verdict.evidence["exponent"] < -0.5
    # y stays 0 and x follows 1/(1 - t) in the fundamental-domain chart up to the homothety
    assert np.max(np.abs(tr.x[:, 1])) == 0.0


def test_minkowski_complete_straight_lines():
    p, v = np.array([0.1, -0.2, 0.3]), np.array([0.7, 0.2, -0.5])
    tr = run("minkowski", p, v, 1000.0)
    assert tr.verdict.kind == "complete"
    assert tr.verdict.t_star == 1000.0
    assert np.max(np.abs(tr.x - (p + np.outer(tr.t, v)))) < 1e-9 * 1000
    assert tr.conserved_drift["energy"] < 1e-10
    assert tr.conserved_drift["clairaut"] < 1e-10
    assert np.all(np.diff(tr.t) > 0)


def cahen_wallach_oracle():
    """Closed-form transverse motion for H = -(z1^2 + z2^2) on the u = t class."""
    g, coords = oracle.pp_wave_metric(lambda u, z1, z2: -(z1**2) - z2**2, 2)
    G = oracle.christoffel(g, coords)
    u, v, z1, z2 = coords
    # with udot = 1 the z1 equation is z1'' = -Gamma^z1_uu
    rhs = sp.simplify(-G[2][0][0])
    t = sp.symbols("t")
    f = sp.Function("f")
    a, b = sp.symbols("a b")
    sol = sp.dsolve(sp.Eq(f(t).diff(t, 2), rhs.subs(z1, f(t))), f(t), ics={f(0): a, f(t).diff(t).subs(t, 0): b})
    return sp.lambdify((t, a, b), sol.rhs, "numpy"), rhs


def test_cahen_wallach_matches_oracle():
    closed, rhs = cahen_wallach_oracle()
    z1 = sp.symbols("z1")
    assert sp.simplify(rhs - (-2 * z1)) == 0
    p = np.array([0.0, 0.0, 0.3, -0.2])
    v = np.array([1.0, 0.0, 0.1, 0.4])
    tr = run("cahen_wallach", p, v, 100.0, lambdas=[-1.0, -1.0])
    assert tr.verdict.kind == "complete"
    err = max(np.max(np.abs(tr.x[:, 2] - closed(tr.t, p[2], v[2]))),
              np.max(np.abs(tr.x[:, 3] - closed(tr.t, p[3], v[3]))))
    assert err < 1e-6


def test_half_plane_leaves_domain():
    tr = run("half_plane", [0, 1], [0, -1], 10.0)
    assert tr.verdict.kind == "left_domain"
    assert tr.verdict.t_star == pytest.approx(1.0, abs=1e-9)


def test_affine_param_offset():
    st = spacetime("minkowski")
    tr = integrate_geodesic(st, GeodesicState(np.zeros(3), np.ones(3), affine_param=5.0), 2.0)
    assert tr.t[0] == 5.0 and tr.t[-1] == pytest.approx(7.0)
    assert tr.verdict.horizon == 7.0


def test_invalid_horizon():
    with pytest.raises(ValueError):
        run("minkowski", [0, 0, 0], [1, 0, 0], 0.0)


def test_initial_point_outside_domain():
    with pytest.raises(BrinkmannError):
        run("half_plane", [0, -1], [1, 0], 1.0)


# -- invariants ---------------------------------------------------------------------


# pp_wave uses a profile with bounded gradient so that geodesics stay complete; the
# default z1^2 - z2^2 profile grows exponentially in z1 and overflows any horizon.
# clifton_pohl_3d and suspension_anosov are integrated in the cover: their quotient
# chart velocities grow without bound, so step counts explode under normalization.
CONSERVATION_CASES = [
    ("minkowski", {}, True),
    ("clifton_pohl", {}, True),
    ("clifton_pohl_3d", {}, False),
    ("half_plane", {}, True),
    ("pp_wave", {"H": "sin(z1)*cos(z2) + u"}, True),
    ("cahen_wallach", {}, True),
    ("rosen_torus", {}, True),
    ("suspension_anosov", {}, False),
]


@pytest.mark.parametrize("key, params, normalize", CONSERVATION_CASES)
def test_energy_conservation(key, params, normalize):
    st = spacetime(key, **params)
    rng = np.random.default_rng(11)
    x0 = st.sample_points(8, seed=11)
    v0 = rng.normal(size=x0.shape)
    v0 /= np.linalg.norm(v0, axis=1)[:, None]
    kinds = set()
    for x, v, tr in zip(x0, v0, integrate_batch(st, x0, v0, 100.0, IntegratorConfig(normalize=normalize))):
        kinds.add(tr.verdict.kind)
        if tr.verdict.kind == "complete":
            assert tr.conserved_drift["energy"] < 1e-6 * (1 + abs(energy(st, x, v)))
            if st.claims_brinkmann:
                assert tr.conserved_drift["clairaut"] < 1e-6
        elif tr.verdict.kind == "escape":
            assert tr.verdict.t_star < 100.0
            assert tr.verdict.evidence["exponent"] < -0.5
        else:
            assert tr.verdict.kind == "left_domain"
    assert "failure" not in kinds


def test_clifton_pohl_3d_escapes_in_cover():
    st = spacetime("clifton_pohl_3d")
    x0 = st.sample_points(4, seed=11)
    rng = np.random.default_rng(11)
    v0 = rng.normal(size=x0.shape)
    for tr in integrate_batch(st, x0, v0, 100.0, IntegratorConfig(normalize=False)):
        assert tr.verdict.kind == "escape"
        # the null Killing field still gives a conserved Clairaut constant
        assert tr.conserved_drift["clairaut"] < 1e-6


def test_exponential_growth_is_not_an_escape():
    tr = run("pp_wave", [0, 0, 0.5, 0], [1, 0, 0, 0], 100.0)
    assert tr.verdict.kind == "failure"
    assert tr.verdict.evidence["final_speed"] > 1e8


def test_normalization_commutes_with_integration():
    st = spacetime("rosen_torus")
    x0 = st.sample_points(10, seed=2)
    rng = np.random.default_rng(2)
    v0 = rng.normal(size=x0.shape)
    on = integrate_batch(st, x0, v0, 10.0, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14))
    off = integrate_batch(st, x0, v0, 10.0, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, normalize=False))
    for a, b in zip(on, off):
        xb, (vb,), _ = st.normalize(b.x[-1], [b.v[-1]], max_word=10**6)
        assert np.max(np.abs(a.x[-1] - xb)) < 1e-8
        assert np.max(np.abs(a.v[-1] - vb)) < 1e-8
        assert a.deck_events > 0


def test_dichotomy_small():
    st = spacetime("rosen_torus")
    x0 = st.sample_points(10, seed=8)
    rng = np.random.default_rng(8)
    v0 = rng.normal(size=x0.shape)
    v0[:, 0] = 0.0
    for tr in integrate_batch(st, x0, v0, 20.0):
        assert np.max(np.abs(tr.x[:, 0] - tr.x[0, 0])) < 1e-10
    v0[:, 0] = 1.0
    for tr in integrate_batch(st, x0, v0, 3.0, IntegratorConfig(normalize=False)):
        assert np.max(np.abs(tr.x[:, 0] - tr.x[0, 0] - tr.t)) < 1e-10


def test_clairaut_values():
    st = spacetime("rosen_torus")
    x = st.sample_points(3)
    v = np.tile([0.7, 0.1, 0.2, 0.3], (3, 1))
    assert np.allclose(clairaut(st, x, v), 0.7)
    assert clairaut(spacetime("clifton_pohl"), [1.0, 0.0], [1.0, 0.0]) is None


# -- blow-up fit ----------------------------------------------------------------------


@pytest.mark.parametrize("p", [-1.0, -2.0, -0.75])
def test_fit_blowup_synthetic(p):
    t = 2.0 - np.geomspace(1.0, 1e-9, 400)
    speed = 3.0 * (2.0 - t) ** p
    q, t_star = fit_blowup(t, speed)
    assert q == pytest.approx(p, abs=0.02)
    assert t_star == pytest.approx(2.0, abs=1e-6)


# -- scans ----------------------------------------------------------------------------


def test_scan_clifton_pohl_finds_escapes():
    st = spacetime("clifton_pohl")
    rep = completeness_scan(st, 200, 100.0, seed=0)
    s = rep["summary"]
    assert s["counts"]["escape"] > 0
    assert sum(s["counts"].values()) == 200
    for r in rep["trajectories"]:
        if r["verdict"] == "escape":
            assert r["blowup_exponent"] < -0.5
            assert r["t_star"] <= 100.0


def test_scan_independent_of_jobs():
    st = spacetime("clifton_pohl")
    a = completeness_scan(st, 120, 5.0, seed=3, jobs=1)
    b = completeness_scan(st, 120, 5.0, seed=3, jobs=2)
    assert a == b


def test_scan_requires_samples():
    with pytest.raises(ValueError):
        completeness_scan(spacetime("minkowski"), 0, 1.0)


# -- mechanical form ------------------------------------------------------------------


def test_mechanical_form_tangent_to_leaf():
    st = spacetime("rosen_torus")
    m = mechanical_form(st, 0.3, [0.2, 0.4], [1.0, -2.0], clairaut_const=0.0)
    assert not np.any(m.A) and not np.any(m.B)
    assert m.residual(np.array([1.0, -2.0])) < 1e-12


def test_mechanical_form_minkowski_zero():
    m = mechanical_form(spacetime("minkowski"), 1.0, [0.5, ], [2.0], clairaut_const=1.0)
    assert not np.any(m.A) and not np.any(m.B)


def test_mechanical_form_pp_wave_B_is_gradient():
    # oracle: -Gamma^z_uu = dH/dz for g_uu = 2H
    g, coords = oracle.pp_wave_metric(lambda u, z1: z1**2, 1)
    G = oracle.christoffel(g, coords)
    assert sp.simplify(-G[2][0][0] - 2 * coords[2]) == 0
    st = spacetime("pp_wave", H="z1^2", n=1)
    for z in [0.3, -1.2, 2.0]:
        m = mechanical_form(st, 0.5, [z], [0.7], clairaut_const=1.0)
        assert m.B[0] == pytest.approx(2 * z, abs=1e-14)
        assert m.residual(np.array([0.7])) < 1e-10


def test_mechanical_form_rosen_residual():
    st = spacetime("rosen_torus")
    rng = np.random.default_rng(0)
    for _ in range(10):
        xd = rng.normal(size=2)
        m = mechanical_form(st, rng.random(), rng.random(2), xd, clairaut_const=1.0)
        assert m.residual(xd) < 1e-10
        assert np.any(m.A)


def test_mechanical_form_wrong_chart():
    with pytest.raises(BrinkmannError):
        mechanical_form(spacetime("clifton_pohl"), 0.0, [1.0], [1.0])
