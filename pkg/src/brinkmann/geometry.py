"""Chart-level pseudo-Riemannian geometry with exact derivatives.

Points and tangent vectors are numpy arrays of chart components.  Every
function that takes a point also accepts a batch of points with shape
``(..., dim)``; the point-level operations named after the library surface
(:func:`eval_metric`, :func:`christoffel`, ...) add validation on top of the
batched kernels used by the integrators.

Index conventions::

    dg[..., a, b, k]      = d_k g_ab
    gamma[..., c, a, b]   = Gamma^c_ab
    riemann[..., d, a, b, c] = R^d_abc   (antisymmetric in b, c)
    ricci[..., a, c]      = R^d_adc
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import dsl
from .errors import DegeneracyError, DomainError, EvaluationError, TransportError
from .integrate import COLLAPSE, DONE, FAILED, dopri
from .jet import Jet

DEGENERACY_TOL = 1e-12


class MetricField:
    """A symmetric bilinear form field whose coefficients are DSL expressions."""

    def __init__(self, coordinates, entries, chart_kind="general", domain=()):
        self.coordinates = tuple(coordinates)
        self.dim = d = len(self.coordinates)
        self.chart_kind = chart_kind
        self.g0 = np.zeros((d, d))
        self._varying = []
        for (a, b), e in entries.items():
            if dsl.is_constant(e):
                self.g0[a, b] = self.g0[b, a] = float(dsl.compile_expr(e)({}))
            else:
                self._varying.append((a, b, dsl.compile_expr(e)))
        self.entries = dict(entries)
        self._domain = [dsl.compile_expr(e) for e in domain]
        self.domain_exprs = list(domain)

    @classmethod
    def from_spec(cls, spec):
        return cls(spec.coordinates, spec.entries, spec.chart_kind, spec.domain)

    # -- evaluation -------------------------------------------------------

    def _env(self, x, order=0):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got shape {x.shape}")
        if order == 0:
            return {n: x[..., i] for i, n in enumerate(self.coordinates)}
        return {n: Jet.variable(x[..., i], i, self.dim, order) for i, n in enumerate(self.coordinates)}

    def matrix(self, x):
        x = np.asarray(x, dtype=float)
        g = np.broadcast_to(self.g0, x.shape[:-1] + self.g0.shape).copy()
        if self._varying:
            env = self._env(x)
            for a, b, f in self._varying:
                g[..., a, b] = g[..., b, a] = f(env)
        return g

    def jets(self, x, order=1):
        """Metric and its exact derivatives: ``(g, dg)`` or ``(g, dg, d2g)``."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        shape = x.shape[:-1]
        g = np.broadcast_to(self.g0, shape + (d, d)).copy()
        dg = np.zeros(shape + (d, d, d))
        d2g = np.zeros(shape + (d, d, d, d)) if order >= 2 else None
        if self._varying:
            env = self._env(x, order)
            for a, b, f in self._varying:
                j = f(env)
                g[..., a, b] = g[..., b, a] = j.val
                dg[..., a, b, :] = dg[..., b, a, :] = j.grad
                if order >= 2:
                    d2g[..., a, b, :, :] = d2g[..., b, a, :, :] = j.hess
        return (g, dg) if order < 2 else (g, dg, d2g)

    def inverse(self, g):
        """Inverse metric; exact block formula in Brinkmann and Rosen charts."""
        if self.chart_kind == "general":
            return np.linalg.inv(g)
        # g = [[H, 1, w], [1, 0, 0], [w^T, 0, h]] with u, v first
        d = self.dim
        h = g[..., 2:, 2:]
        w = g[..., 0, 2:]
        hinv = np.linalg.inv(h)
        hw = np.einsum("...ij,...j->...i", hinv, w)
        out = np.zeros(g.shape)
        out[..., 0, 1] = out[..., 1, 0] = 1.0
        out[..., 1, 1] = -g[..., 0, 0] + np.einsum("...i,...i->...", w, hw)
        out[..., 1, 2:] = -hw
        out[..., 2:, 1] = -hw
        out[..., 2:, 2:] = hinv
        assert out.shape[-1] == d
        return out

    def domain_margin(self, x):
        """Smallest domain-constraint value; positive inside the chart domain."""
        x = np.asarray(x, dtype=float)
        if not self._domain:
            return np.full(x.shape[:-1], np.inf)
        env = self._env(x)
        vals = [np.broadcast_to(f(env), x.shape[:-1]) for f in self._domain]
        return np.min(np.stack(vals), axis=0)

    def in_domain(self, x):
        return self.domain_margin(x) > 0


class VectorField:
    """A vector field given by one DSL expression per chart component."""

    def __init__(self, coordinates, components):
        self.coordinates = tuple(coordinates)
        self.dim = len(self.coordinates)
        comps = [dsl.parse_expr(c, self.coordinates) if isinstance(c, str) else c for c in components]
        if len(comps) != self.dim:
            raise ValueError(f"expected {self.dim} components")
        self.components = tuple(comps)
        self._fns = [dsl.compile_expr(e) for e in comps]
        self.constant = all(dsl.is_constant(e) for e in comps)

    @classmethod
    def constant_field(cls, coordinates, vec):
        return cls(coordinates, [dsl.Const(float(c)) for c in vec])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        env = {n: x[..., i] for i, n in enumerate(self.coordinates)}
        return np.stack([np.broadcast_to(f(env), x.shape[:-1]) for f in self._fns], axis=-1)

    def jets(self, x):
        """Values ``(..., d)`` and Jacobian ``(..., d, d)`` with ``jac[c, a] = d_a Y^c``."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        shape = x.shape[:-1]
        env = {n: Jet.variable(x[..., i], i, d) for i, n in enumerate(self.coordinates)}
        vals = np.zeros(shape + (d,))
        jac = np.zeros(shape + (d, d))
        for c, f in enumerate(self._fns):
            j = f(env)
            if isinstance(j, Jet):
                vals[..., c] = j.val
                jac[..., c, :] = j.grad
            else:
                vals[..., c] = j
        return vals, jac


# -- batched kernels ------------------------------------------------------


def lowered_christoffel(dg):
    """Gamma_dab = (d_a g_bd + d_b g_ad - d_d g_ab) / 2, exactly symmetric in a, b."""
    nd = dg.ndim
    ax = list(range(nd - 3))
    i, j, k = nd - 3, nd - 2, nd - 1
    t1 = np.transpose(dg, ax + [j, k, i])
    t2 = np.transpose(dg, ax + [j, i, k])
    t3 = np.transpose(dg, ax + [k, i, j])
    return 0.5 * (t1 + t2 - t3)


def christoffel_array(field: MetricField, x):
    g, dg = field.jets(x)
    ginv = field.inverse(g)
    return np.einsum("...cd,...dab->...cab", ginv, lowered_christoffel(dg))


def geodesic_acceleration(field: MetricField, x, xdot):
    """-Gamma^c_ab xdot^a xdot^b without forming the full Christoffel array."""
    g, dg = field.jets(x)
    xdot = np.asarray(xdot, dtype=float)
    # Gamma_d(v, v) = v^a v^b d_a g_bd - (1/2) v^a v^b d_d g_ab
    dv = np.einsum("...bdk,...k->...bd", dg, xdot)
    low = np.einsum("...bd,...b->...d", dv, xdot) - 0.5 * np.einsum("...abd,...a,...b->...d", dg, xdot, xdot)
    if field.chart_kind == "general":
        return -np.linalg.solve(g, low[..., None])[..., 0]
    return -np.einsum("...cd,...d->...c", field.inverse(g), low)


def inner(field: MetricField, x, v, w):
    return np.einsum("...a,...ab,...b->...", v, field.matrix(x), w)


def curvature_arrays(field: MetricField, x):
    """Christoffels, Riemann tensor and Ricci tensor from second-order jets."""
    g, dg, d2g = field.jets(x, order=2)
    ginv = field.inverse(g)
    low = lowered_christoffel(dg)
    gamma = np.einsum("...cd,...dab->...cab", ginv, low)
    # d_e Gamma_dab from d2g[a, b, k, l] = d_l d_k g_ab
    nd = d2g.ndim
    ax = list(range(nd - 4))
    i, j, k, l = nd - 4, nd - 3, nd - 2, nd - 1
    dlow = 0.5 * (
        np.transpose(d2g, ax + [j, k, i, l])
        + np.transpose(d2g, ax + [j, i, k, l])
        - np.transpose(d2g, ax + [k, i, j, l])
    )
    dginv = -np.einsum("...cp,...pqe,...qd->...cde", ginv, dg, ginv)
    dgamma = np.einsum("...cde,...dab->...cabe", dginv, low) + np.einsum("...cd,...dabe->...cabe", ginv, dlow)
    # R^r_smn = d_m G^r_ns - d_n G^r_ms + G^r_ml G^l_ns - G^r_nl G^l_ms
    ddiff = np.einsum("...rnsm->...rsmn", dgamma)
    quad = np.einsum("...rml,...lns->...rsmn", gamma, gamma)
    riemann = ddiff - np.swapaxes(ddiff, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    ricci = np.einsum("...rsrn->...sn", riemann)
    return g, gamma, riemann, ricci


# -- point-level operations -----------------------------------------------


@dataclass(frozen=True)
class MetricSample:
    matrix: np.ndarray
    signature: tuple[int, int]  # (negative_count, positive_count)

    @property
    def lorentzian(self) -> bool:
        return is_lorentzian(self.signature)


def is_lorentzian(signature) -> bool:
    """One timelike direction in either sign convention (-+++ or +---)."""
    neg, pos = signature
    return neg + pos >= 2 and (neg == 1 or pos == 1)


@dataclass(frozen=True)
class ChristoffelAt:
    gamma: np.ndarray  # gamma[c, a, b] = Gamma^c_ab


@dataclass(frozen=True)
class CurvatureAt:
    riemann: np.ndarray  # riemann[d, a, b, c] = R^d_abc
    ricci: np.ndarray
    metric: np.ndarray

    def lowered(self):
        """R_abcd = g_ae R^e_bcd."""
        return np.einsum("ae,ebcd->abcd", self.metric, self.riemann)

    @property
    def bianchi_residual(self) -> float:
        r = self.riemann
        cyc = r + np.transpose(r, (0, 2, 3, 1)) + np.transpose(r, (0, 3, 1, 2))
        return float(np.max(np.abs(cyc)))


def _point(field, p):
    p = np.asarray(p, dtype=float)
    if p.shape != (field.dim,):
        raise ValueError(f"point must have {field.dim} coordinates, got shape {p.shape}")
    try:
        margin = field.domain_margin(p)
    except EvaluationError as exc:
        raise DomainError(f"point {p.tolist()} is outside the chart domain: {exc}") from exc
    if not margin > 0:
        raise DomainError(f"point {p.tolist()} is outside the chart domain")
    return p


def check_nondegenerate(g):
    d = g.shape[-1]
    scale = np.max(np.abs(g))
    if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) < DEGENERACY_TOL * scale**d:
        raise DegeneracyError("metric is degenerate at this point")


def signature(g) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(g)
    return int(np.sum(ev < 0)), int(np.sum(ev > 0))


def eval_metric(field: MetricField, p) -> MetricSample:
    p = _point(field, p)
    try:
        g = field.matrix(p)
    except EvaluationError as exc:
        raise DomainError(str(exc)) from exc
    check_nondegenerate(g)
    return MetricSample(g, signature(g))


def christoffel(field: MetricField, p) -> ChristoffelAt:
    p = _point(field, p)
    g, dg = field.jets(p)
    check_nondegenerate(g)
    return ChristoffelAt(np.einsum("cd,dab->cab", field.inverse(g), lowered_christoffel(dg)))


def covariant_derivative(field: MetricField, X, Y, p):
    """(nabla_X Y)^c = X^a d_a Y^c + Gamma^c_ab X^a Y^b at ``p``.

    ``X`` and ``Y`` are :class:`VectorField` instances or constant component
    vectors.
    """
    p = _point(field, p)
    d = field.dim
    if isinstance(X, VectorField):
        xv = X(p)
    else:
        xv = np.asarray(X, dtype=float)
    if isinstance(Y, VectorField):
        yv, yjac = Y.jets(p)
    else:
        yv, yjac = np.asarray(Y, dtype=float), np.zeros((d, d))
    gamma = christoffel(field, p).gamma
    return yjac @ xv + np.einsum("cab,a,b->c", gamma, xv, yv)


@dataclass(frozen=True)
class TransportResult:
    vector: np.ndarray
    norm_drift: float  # max |g(v, v) - g(v0, v0)| over accepted steps
    gram_drift: float  # same for the full Gram matrix when several vectors travel together


class Curve:
    """Parametrized chart curve ``t -> (x(t), x'(t))`` on ``[t0, t1]``."""

    def __init__(self, func: Callable, t0: float, t1: float):
        self.func = func
        self.t0 = float(t0)
        self.t1 = float(t1)

    def __call__(self, t):
        return self.func(t)

    @classmethod
    def from_samples(cls, t, x, xdot):
        """Cubic Hermite interpolation through sampled positions and velocities."""
        from scipy.interpolate import CubicHermiteSpline

        t = np.asarray(t, dtype=float)
        spline = CubicHermiteSpline(t, np.asarray(x, dtype=float), np.asarray(xdot, dtype=float), axis=0)
        deriv = spline.derivative()
        return cls(lambda s: (spline(s), deriv(s)), t[0], t[-1])


def parallel_transport(field: MetricField, curve, v0, *, rtol=1e-11, atol=1e-13, min_step=1e-12):
    """Solve v' + Gamma(x') v = 0 along ``curve`` and return the endpoint vector(s).

    ``curve`` is a :class:`Curve` or a tuple ``(t, x, xdot)`` of samples.
    ``v0`` is one vector ``(d,)`` or several ``(k, d)`` transported together.
    """
    if not isinstance(curve, Curve):
        curve = Curve.from_samples(*curve)
    v0 = np.asarray(v0, dtype=float)
    single = v0.ndim == 1
    vs = np.atleast_2d(v0)
    k, d = vs.shape
    x0 = np.asarray(curve(curve.t0)[0], dtype=float)
    _point(field, x0)
    gram0 = np.einsum("ia,ab,jb->ij", vs, field.matrix(x0), vs)
    drift = [0.0, 0.0]

    def rhs(t, y):
        out = np.empty_like(y)
        for r in range(y.shape[0]):
            x, xd = curve(t[r])
            gamma = christoffel_array(field, np.asarray(x, dtype=float))
            v = y[r].reshape(k, d)
            out[r] = -np.einsum("cab,a,kb->kc", gamma, np.asarray(xd, dtype=float), v).ravel()
        return out

    def on_step(rows, t, y, h):
        x, _ = curve(t[0])
        v = y[0].reshape(k, d)
        gram = np.einsum("ia,ab,jb->ij", v, field.matrix(np.asarray(x, dtype=float)), v)
        diff = np.abs(gram - gram0)
        drift[0] = max(drift[0], float(np.max(np.diag(diff))))
        drift[1] = max(drift[1], float(np.max(diff)))
        return y, None, np.zeros(len(rows), dtype=bool)

    res = dopri(rhs, curve.t0, vs.reshape(1, -1), curve.t1, rtol=rtol, atol=atol, min_step=min_step, on_step=on_step)
    if res.status[0] != DONE:
        reason = "step size collapsed" if res.status[0] == COLLAPSE else "integration failed"
        if res.status[0] not in (COLLAPSE, FAILED):
            reason = "transport stopped"
        raise TransportError(reason, float(res.t[0]))
    v = res.y[0].reshape(k, d)
    return TransportResult(v[0] if single else v, drift[0], drift[1])


def curvature(field: MetricField, p) -> CurvatureAt:
    p = _point(field, p)
    g, _, riemann, ricci = curvature_arrays(field, p)
    check_nondegenerate(g)
    return CurvatureAt(riemann, 0.5 * (ricci + ricci.T), g)


def christoffel_fd(field: MetricField, p, h=1e-5):
    """Christoffels from central differences of the metric (an independent check)."""
    p = np.asarray(p, dtype=float)
    d = field.dim
    dg = np.zeros((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        dg[:, :, k] = (field.matrix(p + e) - field.matrix(p - e)) / (2 * h)
    g = field.matrix(p)
    return np.einsum("cd,dab->cab", np.linalg.inv(g), lowered_christoffel(dg))


def frame_gram(field: MetricField, x, frame: Sequence[np.ndarray]):
    f = np.asarray(frame, dtype=float)
    return np.einsum("ia,ab,jb->ij", f, field.matrix(x), f)
