import numpy as np
import pytest

from conftest import spacetime
from brinkmann.errors import BrinkmannError
from brinkmann.verify import (
    brinkmann_certificate,
    frame_on_E,
    frame_residuals,
    frame_transport_along_V,
    norm_growth_bound,
    ppwave_ricci_harmonic,
    ruled_surface,
    totally_geodesic_surface,
)

BRINKMANN_KEYS = ["minkowski", "half_plane", "pp_wave", "cahen_wallach", "rosen_torus"]


# -- certificates -------------------------------------------------------------------


@pytest.mark.parametrize("key", BRINKMANN_KEYS)
def test_claimed_entries_pass(key):
    st = spacetime(key)
    assert st.claims_brinkmann
    cert = brinkmann_certificate(st)
    assert cert.passed
    assert max(cert.max_nabla_V, cert.max_g_VV, cert.max_d_alpha) < 1e-10
    assert cert.n_points >= 100


def test_pp_wave_profiles_pass():
    for H in ["z1^3", "u*z1^2", "sin(u)*z1*z2 + exp(z2)"]:
        assert brinkmann_certificate(spacetime("pp_wave", H=H)).passed


def test_minkowski_exact():
    cert = brinkmann_certificate(spacetime("minkowski"))
    assert cert.max_nabla_V == cert.max_g_VV == cert.max_d_alpha == 0.0


def test_clifton_pohl_3d_null_killing_not_parallel():
    cert = brinkmann_certificate(spacetime("clifton_pohl_3d"))
    assert cert.max_g_VV < 1e-12
    assert cert.max_nabla_V > 0.1
    assert cert.max_killing < 1e-12
    assert not cert.checks["parallel"]
    assert cert.checks["null"]


def test_certificate_needs_field():
    with pytest.raises(BrinkmannError):
        brinkmann_certificate(spacetime("clifton_pohl"))


def test_certificate_is_deterministic():
    st = spacetime("rosen_torus")
    assert brinkmann_certificate(st, seed=3).to_json() == brinkmann_certificate(st, seed=3).to_json()


# -- surfaces -------------------------------------------------------------------------


def pp_cubic():
    return spacetime("pp_wave", H="z1^3")


def test_totally_geodesic_surface_pp_wave():
    st = pp_cubic()
    p = np.array([0.1, 0.2, 0.3, -0.4])
    patch = totally_geodesic_surface(st, p, [0.0, 0.0, 0.6, 0.8])
    assert patch.points.shape == (21, 21, 4)
    assert patch.max_ii < 1e-6
    assert patch.max_curvature < 1e-6


def test_surface_through_transversal_direction():
    st = pp_cubic()
    p = np.array([0.0, 0.0, 0.5, 0.2])
    patch = totally_geodesic_surface(st, p, [1.0, 0.0, 0.3, -0.2])
    assert patch.max_ii < 1e-6
    assert patch.max_curvature < 1e-6


def test_minkowski_planes_flat():
    st = spacetime("minkowski")
    patch = totally_geodesic_surface(st, [0, 0, 0], [1.0, 0.0, 1.0])
    assert patch.max_ii < 1e-12
    assert patch.max_curvature == 0.0


def test_control_plane_not_totally_geodesic():
    st = pp_cubic()
    p = np.array([0.1, 0.2, 0.3, -0.4])
    patch = ruled_surface(st, p, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0])
    assert patch.max_ii > 1e-3


def test_surface_refinement_converges():
    st = spacetime("pp_wave", H="sin(z1) * u")
    p = np.array([0.2, 0.0, 0.4, 0.1])
    coarse = totally_geodesic_surface(st, p, [1.0, 0.0, 0.2, 0.3], grid=(11, 11))
    fine = totally_geodesic_surface(st, p, [1.0, 0.0, 0.2, 0.3], grid=(21, 21))
    assert fine.max_ii <= coarse.max_ii + 1e-12
    assert fine.max_ii < 1e-6


def test_surface_rejects_Q_parallel_to_V():
    with pytest.raises(BrinkmannError):
        totally_geodesic_surface(pp_cubic(), [0, 0, 0, 0], [0, 2.0, 0, 0])


# -- frames ----------------------------------------------------------------------------


def test_frame_on_E_orthonormal():
    st = spacetime("pp_wave", H="u*z1^2")
    f = frame_on_E(st, [0.3, 0.1, 0.2, -0.5])
    orth, gram = frame_residuals(st, f)
    assert orth < 1e-10 and gram < 1e-8
    assert f.vectors.shape == (2, 4)


def test_rosen_coordinate_frame_invariant():
    st = spacetime("rosen_torus")
    p = np.array([0.25, 0.1, 0.3, 0.7])
    g = st.metric.matrix(p)
    e = np.zeros((2, 4))
    e[0, 2] = 1 / np.sqrt(g[2, 2])
    e[1, 3] = 1 / np.sqrt(g[3, 3])
    f = frame_on_E(st, p, e)
    assert np.allclose(f.vectors, e, atol=1e-15)
    tr = frame_transport_along_V(st, f, 0.6)
    assert np.allclose(tr.frame.vectors, e, atol=1e-12)
    assert tr.horizontality_residual < 1e-8


def test_minkowski_frame_unchanged():
    st = spacetime("minkowski", n=3)
    f = frame_on_E(st, [0, 0, 0, 0], [[0.0, 0.0, 0.6, 0.8], [0.0, 0.0, -0.8, 0.6]])
    tr = frame_transport_along_V(st, f, 2.5)
    assert np.allclose(tr.frame.vectors, f.vectors, atol=1e-14)


def test_pp_wave_frame_transport_gram():
    st = spacetime("pp_wave", H="u*z1^2")
    f = frame_on_E(st, [0.3, 0.1, 0.2, -0.5], [[1.0, 0.0, 1.0, 0.3], [0.0, 2.0, -0.4, 1.0]])
    tr = frame_transport_along_V(st, f, 1.0)
    assert tr.gram_residual < 1e-8
    assert tr.horizontality_residual < 1e-8
    tighter = frame_transport_along_V(st, f, 1.0, rtol=0.5e-12)
    assert np.max(np.abs(tighter.frame.vectors - tr.frame.vectors)) < 1e-8


def test_frame_round_trip():
    st = spacetime("cahen_wallach")
    f = frame_on_E(st, [0.2, 0.3, 0.4, -0.1])
    there = frame_transport_along_V(st, f, 1.5)
    back = frame_transport_along_V(st, there.frame, -1.5)
    assert np.max(np.abs(back.frame.vectors - f.vectors)) < 1e-8
    assert np.max(np.abs(back.frame.base - f.base)) < 1e-8


# -- Ricci and harmonic profiles ----------------------------------------------------------


def test_ricci_harmonic_profile():
    rep = ppwave_ricci_harmonic("z1^2 - z2^2")
    assert rep.max_ricci_residual < 1e-8
    assert rep.max_laplacian_residual < 1e-8


def test_ricci_non_harmonic_profile():
    rep = ppwave_ricci_harmonic("z1^2 + z2^2")
    assert rep.max_laplacian_residual == 4.0
    assert rep.max_ricci_residual > 0
    assert rep.ratio_mean == pytest.approx(-1.0, abs=1e-12)
    assert rep.ratio_spread < 1e-10


def test_ricci_flat_profile():
    rep = ppwave_ricci_harmonic("0")
    assert rep.max_ricci_residual == 0.0
    assert rep.max_laplacian_residual == 0.0


def test_ricci_variable_laplacian_ratio():
    rep = ppwave_ricci_harmonic("z1^4 + u*z2^2 + z3^2", n=3)
    assert rep.ratio_mean == pytest.approx(-1.0, abs=1e-10)
    assert rep.ratio_spread < 1e-8


def test_ricci_needs_two_dimensions():
    with pytest.raises(ValueError):
        ppwave_ricci_harmonic("z1^2", n=1)


# -- norm growth ------------------------------------------------------------------------------


def test_norm_growth_flat_torus():
    st = spacetime("rosen_torus", alpha=[["1", "0"], ["0", "1"]])
    rep = norm_growth_bound(st, speeds=(1, 10), trials=5)
    assert rep.C < 1e-8
    assert rep.violations == 0


def test_norm_growth_requires_rosen_compact():
    with pytest.raises(BrinkmannError):
        norm_growth_bound(spacetime("pp_wave"))
