"""Acceptance suite: one test per criterion, each recording a pass/fail line."""

import math
import time

import numpy as np
import sympy as sp

import oracle
from conftest import record, spacetime
from brinkmann.catalog import CATALOG
from brinkmann.cli import run
from brinkmann.dynamics import equicontinuity_diagnostic
from brinkmann.geodesics import (
    GeodesicState,
    IntegratorConfig,
    completeness_scan,
    default_jobs,
    integrate_batch,
    integrate_geodesic,
)
from brinkmann.geometry import christoffel, christoffel_fd
from brinkmann.verify import (
    brinkmann_certificate,
    norm_growth_bound,
    ppwave_ricci_harmonic,
    ruled_surface,
    totally_geodesic_surface,
)


def check(number, conditions, detail):
    ok = all(conditions)
    record(number, ok, detail)
    assert ok, detail


def test_clifton_pohl_incompleteness():
    st = spacetime("clifton_pohl")
    start = time.perf_counter()
    tr = integrate_geodesic(st, GeodesicState(np.array([1.0, 0.0]), np.array([1.0, 0.0])), 10.0)
    elapsed = time.perf_counter() - start
    v = tr.verdict
    check(1, [v.kind == "escape", abs(v.t_star - 1.0) < 1e-3, elapsed < 1.0],
          f"verdict={v.kind} t*={v.t_star:.9f} exponent={v.evidence.get('exponent', float('nan')):.4f} "
          f"runtime={elapsed:.2f}s")


def test_compact_brinkmann_completeness():
    st = spacetime("rosen_torus")
    start = time.perf_counter()
    rep = completeness_scan(st, 200, 100.0, seed=0, jobs=default_jobs())
    elapsed = time.perf_counter() - start
    s = rep["summary"]
    check(2, [s["fraction_complete"] == 1.0, s["max_energy_drift"] < 1e-6, s["max_clairaut_drift"] < 1e-6,
              elapsed < 30.0],
          f"complete={s['fraction_complete']:.0%} energy_drift={s['max_energy_drift']:.2e} "
          f"clairaut_drift={s['max_clairaut_drift']:.2e} runtime={elapsed:.1f}s")


def test_leaf_dichotomy():
    st = spacetime("rosen_torus")
    rng = np.random.default_rng(42)
    x0 = st.sample_points(50, seed=42)
    v0 = rng.normal(size=x0.shape)
    v0[:, 0] = 0.0
    flat = max(np.max(np.abs(tr.x[:, 0] - tr.x[0, 0])) for tr in integrate_batch(st, x0, v0, 100.0))
    v1 = rng.normal(size=x0.shape)
    v1[:, 0] = 1.0
    # the twist u -> u + 1 keeps u in [0, 1), so compare modulo the period
    errs = []
    for tr in integrate_batch(st, x0, v1, 100.0):
        d = tr.x[:, 0] - tr.x[0, 0] - tr.t
        errs.append(np.max(np.abs(d - np.round(d))))
    affine = max(errs)
    cover = max(np.max(np.abs(tr.x[:, 0] - tr.x[0, 0] - tr.t))
                for tr in integrate_batch(st, x0, v1, 10.0, IntegratorConfig(normalize=False)))
    check(3, [flat < 1e-10, affine < 1e-10, cover < 1e-10],
          f"g(v,V)=0: max|u-u0|={flat:.1e}; g(v,V)=1: max|u-u0-t| mod 1={affine:.1e}, in cover={cover:.1e}")


def test_brinkmann_certificates():
    claimed = [k for k in CATALOG if spacetime(k).claims_brinkmann]
    certs = {k: brinkmann_certificate(spacetime(k)) for k in claimed}
    worst = max(max(c.max_nabla_V, c.max_g_VV, c.max_d_alpha) for c in certs.values())
    cp = brinkmann_certificate(spacetime("clifton_pohl_3d"))
    # for a Killing field d(alpha) = 2 nabla(alpha), so closedness fails together with parallelism
    check(4, [all(c.passed for c in certs.values()), worst < 1e-8,
              cp.max_nabla_V > 0.1, cp.max_g_VV < 1e-12, cp.max_killing < 1e-12,
              not cp.checks["parallel"], cp.checks["null"]],
          f"claimed={claimed} worst_residual={worst:.1e}; clifton_pohl_3d nabla={cp.max_nabla_V:.3f} "
          f"null={cp.max_g_VV:.1e} killing={cp.max_killing:.1e} closed={cp.max_d_alpha:.3f}")


def test_totally_geodesic_flat_surfaces():
    st = spacetime("pp_wave", H="z1^3")
    rng = np.random.default_rng(5)
    ii, curv, ctl = [], [], []
    for _ in range(10):
        p = np.concatenate([rng.uniform(-0.5, 0.5, 1), [0.0], rng.uniform(-0.5, 0.5, 2)])
        Q = rng.normal(size=4)
        patch = totally_geodesic_surface(st, p, Q / np.linalg.norm(Q), grid=(21, 21), check_certificate=False)
        ii.append(patch.max_ii)
        curv.append(patch.max_curvature)
    for _ in range(10):
        p = np.concatenate([rng.uniform(-0.5, 0.5, 1), [0.0], rng.uniform(-0.5, 0.5, 2)])
        # control planes: u-direction and a transverse direction, V not in the span
        Q1 = np.array([1.0, 0.0, *rng.normal(size=2) * 0.3])
        Q2 = np.array([0.0, 0.0, *rng.normal(size=2)])
        ctl.append(ruled_surface(st, p, Q1, Q2 / np.linalg.norm(Q2), grid=(21, 21)).max_ii)
    check(5, [max(ii) < 1e-6, max(curv) < 1e-6, min(ctl) > 1e-3],
          f"planes with V: max II={max(ii):.1e} max curvature={max(curv):.1e}; controls: min II={min(ctl):.3f}")


def test_norm_growth_uniform_constant():
    st = spacetime("rosen_torus")
    fit = norm_growth_bound(st, speeds=(1, 10, 100), trials=20, eps=0.1)
    rep = norm_growth_bound(st, speeds=(1, 10, 100, 1000), trials=20, eps=0.1, C=fit.C)
    check(6, [rep.violations == 0, fit.violations == 0],
          f"eps=0.1 C={fit.C:.4f} violations={rep.violations} over speeds 1..1000 "
          f"(per-speed max slope {', '.join(f'{k:g}:{v:.3f}' for k, v in rep.per_speed.items())})")


def test_equicontinuity_contrast():
    start = time.perf_counter()
    rosen = equicontinuity_diagnostic(spacetime("rosen_torus"), N=50, T=100.0)
    t_rosen = time.perf_counter() - start
    start = time.perf_counter()
    anosov = equicontinuity_diagnostic(spacetime("suspension_anosov", A=[[2, 1], [1, 1]]), N=50, T=20.0)
    t_anosov = time.perf_counter() - start
    target = math.log((3 + math.sqrt(5)) / 2)
    rel = abs(anosov.fitted_rate - target) / target
    check(7, [rosen.classification == "bounded", abs(rosen.fitted_rate) < 1e-6, t_rosen < 10,
              anosov.classification == "exponential_growth", rel < 0.02, t_anosov < 10],
          f"rosen {rosen.classification} rate={rosen.fitted_rate:.1e} ({t_rosen:.2f}s); suspension "
          f"{anosov.classification} rate={anosov.fitted_rate:.6f} vs {target:.6f} rel_err={rel:.1e} ({t_anosov:.2f}s)")


def test_ricci_harmonic_equivalence():
    harm = ppwave_ricci_harmonic("z1^2 - z2^2")
    non = ppwave_ricci_harmonic("z1^2 + z2^2")
    g, coords = oracle.pp_wave_metric(lambda u, z1, z2: z1**2 + z2**2, 2)
    oracle_ratio = float(oracle.ricci(g, coords)[0, 0] / 4)
    check(8, [harm.max_ricci_residual < 1e-8, harm.max_laplacian_residual < 1e-8,
              non.max_laplacian_residual == 4.0, non.max_ricci_residual > 0,
              abs(non.ratio_mean - oracle_ratio) < 1e-12, non.ratio_spread < 1e-12],
          f"harmonic: ricci={harm.max_ricci_residual:.1e} laplacian={harm.max_laplacian_residual:.1e}; "
          f"z1^2+z2^2: laplacian={non.max_laplacian_residual} ratio={non.ratio_mean} "
          f"(oracle {oracle_ratio}) spread={non.ratio_spread:.1e}")


def test_oracle_equivalence():
    # symbolic oscillator: z'' = -Gamma^z_uu for the u = t class of H = -(z1^2 + z2^2)
    g, coords = oracle.pp_wave_metric(lambda u, z1, z2: -(z1**2) - z2**2, 2)
    G = oracle.christoffel(g, coords)
    t, a, b = sp.symbols("t a b")
    f = sp.Function("f")
    sols = []
    for i in (2, 3):
        rhs = -G[i][0][0]
        ode = sp.Eq(f(t).diff(t, 2), rhs.subs(coords[i], f(t)))
        sol = sp.dsolve(ode, f(t), ics={f(0): a, f(t).diff(t).subs(t, 0): b}).rhs
        sols.append(sp.lambdify((t, a, b), sol, "numpy"))
    st = spacetime("cahen_wallach", lambdas=[-1.0, -1.0])
    rng = np.random.default_rng(9)
    sup = 0.0
    for _ in range(5):
        p = np.array([0.0, 0.0, *rng.uniform(-1, 1, 2)])
        v = np.array([1.0, rng.normal(), *rng.uniform(-1, 1, 2)])
        tr = integrate_geodesic(st, GeodesicState(p, v), 100.0)
        for k, sol in zip((2, 3), sols):
            sup = max(sup, float(np.max(np.abs(tr.x[:, k] - sol(tr.t, p[k], v[k])))))
    fd = 0.0
    for key in CATALOG:
        s = spacetime(key)
        for q in s.sample_points(100, seed=17):
            fd = max(fd, float(np.max(np.abs(christoffel(s.metric, q).gamma - christoffel_fd(s.metric, q)))))
    check(9, [sup < 1e-6, fd < 1e-6],
          f"Cahen-Wallach sup error={sup:.1e} over T=100; Christoffel vs finite differences={fd:.1e}")


def test_cli_determinism(tmp_path):
    commands = {
        "list": ["list"],
        "geodesic": ["geodesic", "--spacetime", "clifton_pohl", "--init", "1,0;1,0", "--tmax", "5"],
        "scan": ["scan", "--spacetime", "clifton_pohl", "--samples", "20", "--tmax", "10", "--seed", "7"],
        "certify": ["certify", "--spacetime", "pp_wave", "--param", "H=z1^3", "--full", "--seed", "2"],
        "flow": ["flow", "--spacetime", "suspension_anosov", "--samples", "5", "--tmax", "5", "--seed", "4"],
        "ricci": ["ricci", "--H", "z1^2 + z2^2", "--seed", "3"],
    }
    same = {}
    for name, argv in commands.items():
        outs = []
        for rep in range(2):
            path = tmp_path / f"{name}{rep}.json"
            assert run(argv + ["--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same[name] = outs[0] == outs[1]
    check(10, list(same.values()), "byte-identical reruns: " + ", ".join(f"{k}={v}" for k, v in same.items()))
