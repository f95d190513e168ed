import math

import numpy as np
import pytest

from conftest import spacetime
from brinkmann.dynamics import as_field, equicontinuity_diagnostic, flow_batch, integrate_flow
from brinkmann.errors import BrinkmannError

LAMBDA = (3 + math.sqrt(5)) / 2


def test_rosen_V_flow_identity():
    st = spacetime("rosen_torus")
    p = np.array([0.3, 0.25, 0.5, 0.5])
    fs = integrate_flow(st, None, p, 100.0)
    assert np.array_equal(fs.jacobian, np.eye(4))
    assert fs.point == pytest.approx([0.3, 0.25, 0.5, 0.5], abs=1e-9)


def test_minkowski_V_flow_translation():
    st = spacetime("minkowski")
    fs = integrate_flow(st, "V", [0.0, 1.0, 2.0], 5.0)
    assert fs.point == pytest.approx([0.0, 6.0, 2.0])
    assert np.array_equal(fs.jacobian, np.eye(3))


def test_suspension_return_map_growth():
    st = spacetime("suspension_anosov")
    fs = integrate_flow(st, None, [0.2, 0.3, 0.1], 10.0)
    assert np.linalg.norm(fs.jacobian, 2) / LAMBDA**10 == pytest.approx(1.0, rel=0.02)
    assert abs(np.linalg.det(fs.jacobian) - 1.0) < 1e-6


def test_group_law():
    st = spacetime("suspension_anosov")
    p = np.array([0.2, 0.3, 0.1])
    a = integrate_flow(st, None, p, 1.3)
    b = integrate_flow(st, None, a.point, 2.1)
    ab = integrate_flow(st, None, p, 3.4)
    scale = np.linalg.norm(ab.jacobian)
    assert np.max(np.abs(b.jacobian @ a.jacobian - ab.jacobian)) < 1e-7 * scale


def test_pushed_frames_keep_gram():
    st = spacetime("pp_wave", H="sin(z1) + u*z2^2")
    p = np.array([0.1, 0.2, 0.3, 0.4])
    fs = integrate_flow(st, None, p, 3.0)
    rng = np.random.default_rng(0)
    E = rng.normal(size=(3, 4))
    G0 = E @ st.metric.matrix(p) @ E.T
    F = E @ fs.jacobian.T
    G1 = F @ st.metric.matrix(fs.point) @ F.T
    assert np.max(np.abs(G1 - G0)) < 1e-6


def test_field_specifications():
    st = spacetime("minkowski")
    assert as_field(st, "V") is st.V
    Y = as_field(st, "1, -1, 0")
    assert np.array_equal(Y(np.zeros(3)), [1.0, -1.0, 0.0])
    with pytest.raises(BrinkmannError):
        as_field(spacetime("clifton_pohl"), None)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        integrate_flow(spacetime("minkowski"), None, [0, 0, 0], -1.0)


def test_equicontinuity_rosen_bounded():
    rep = equicontinuity_diagnostic(spacetime("rosen_torus"), N=50, T=100.0)
    assert rep.classification == "bounded"
    assert abs(rep.fitted_rate) < 1e-6
    assert not rep.failures


def test_equicontinuity_suspension_exponential():
    rep = equicontinuity_diagnostic(spacetime("suspension_anosov"), N=50, T=20.0)
    assert rep.classification == "exponential_growth"
    assert rep.fitted_rate == pytest.approx(math.log(LAMBDA), rel=0.02)


def test_equicontinuity_minkowski_timelike_field():
    rep = equicontinuity_diagnostic(spacetime("minkowski"), "1, -1, 0", N=10, T=100.0)
    assert rep.classification == "bounded"


@pytest.mark.parametrize("key", ["rosen_torus", "suspension_anosov"])
def test_classification_stable_under_reseeding(key):
    st = spacetime(key)
    a = equicontinuity_diagnostic(st, N=50, T=20.0, seed=0)
    b = equicontinuity_diagnostic(st, N=200, T=20.0, seed=5)
    assert a.classification == b.classification


def test_flow_batch_shapes():
    st = spacetime("rosen_torus")
    x0 = st.sample_points(3)
    pts, jac = flow_batch(st, st.V, x0, np.linspace(0, 2, 5))
    assert pts.shape == (5, 3, 4)
    assert jac.shape == (5, 3, 4, 4)
