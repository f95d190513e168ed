"""Checks of Brinkmann structure and of the constructions built on it.

* :func:`brinkmann_certificate`: V null, parallel, and g(V, .) closed.
* :func:`totally_geodesic_surface`: the V-orbit sweep of a geodesic, with a
  numerical second fundamental form; :func:`ruled_surface` builds the same
  kind of patch for any plane (used for control experiments).
* :func:`frame_on_E` and :func:`frame_transport_along_V`: orthonormal frames
  of V-perp / V and their transport along V.
* :func:`ppwave_ricci_harmonic`: Ricci flatness against harmonicity of H.
* :func:`norm_growth_bound`: the linear growth bound for transverse speeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import dsl
from .catalog import Spacetime, build
from .errors import BrinkmannError, DomainError
from .geometry import (
    VectorField,
    christoffel_array,
    curvature_arrays,
    geodesic_acceleration,
    parallel_transport,
    Curve,
)
from .integrate import DONE, dopri

CERT_TOL = 1e-8


# -- certificate ----------------------------------------------------------------


@dataclass
class BrinkmannCertificate:
    max_nabla_V: float
    max_g_VV: float
    max_d_alpha: float
    max_killing: float
    n_points: int
    tolerance: float = CERT_TOL
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self):
        return {
            "max_nabla_V": self.max_nabla_V,
            "max_g_VV": self.max_g_VV,
            "max_d_alpha": self.max_d_alpha,
            "max_killing": self.max_killing,
            "n_points": self.n_points,
            "tolerance": self.tolerance,
            "checks": dict(self.checks),
            "passed": self.passed,
        }


def field_residuals(st: Spacetime, V: VectorField, x):
    """Per-point residuals ``(|nabla V|, |g(V,V)|, |d alpha|, |L_V g|)`` at points ``x``."""
    g, dg = st.metric.jets(x)
    gamma = christoffel_array(st.metric, x)
    vals, jac = V.jets(x)
    # (nabla_a V)^c = d_a V^c + Gamma^c_ab V^b
    nabla = jac + np.einsum("...cab,...b->...ca", gamma, vals)
    gvv = np.einsum("...a,...ab,...b->...", vals, g, vals)
    # d_a alpha_b with alpha_b = g_bc V^c
    dalpha = np.einsum("...bca,...c->...ab", dg, vals) + np.einsum("...bc,...ca->...ab", g, jac)
    curl = dalpha - np.swapaxes(dalpha, -1, -2)
    lie = (
        np.einsum("...c,...abc->...ab", vals, dg)
        + np.einsum("...cb,...ca->...ab", g, jac)
        + np.einsum("...ac,...cb->...ab", g, jac)
    )
    red = lambda a: np.max(np.abs(a), axis=(-1, -2))  # noqa: E731
    return red(nabla), np.abs(gvv), red(curl), red(lie)


def brinkmann_certificate(st: Spacetime, n_points: int = 128, seed: int = 0, tol: float = CERT_TOL) -> BrinkmannCertificate:
    """Check that the distinguished field is null and parallel at quasi-random points."""
    if st.V is None:
        raise BrinkmannError(f"{st.name} has no distinguished vector field")
    x = st.sample_points(max(n_points, 100), seed=seed, method="halton")
    nab, gvv, curl, lie = field_residuals(st, st.V, x)
    cert = BrinkmannCertificate(
        max_nabla_V=float(np.max(nab)),
        max_g_VV=float(np.max(gvv)),
        max_d_alpha=float(np.max(curl)),
        max_killing=float(np.max(lie)),
        n_points=len(x),
        tolerance=tol,
    )
    cert.checks = {
        "parallel": cert.max_nabla_V < tol,
        "null": cert.max_g_VV < tol,
        "closed": cert.max_d_alpha < tol,
    }
    return cert


# -- ruled surfaces -------------------------------------------------------------------

# fourth order central difference weights on offsets -2..2
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass
class SurfacePatch:
    s: np.ndarray
    w: np.ndarray
    points: np.ndarray  # (m, k, d)
    T1: np.ndarray  # (m, k, d), NaN where the stencil does not fit
    T2: np.ndarray
    second_fundamental_form_norms: np.ndarray  # (m, k)
    induced_curvature: np.ndarray  # (m, k)

    @property
    def max_ii(self) -> float:
        return float(np.nanmax(self.second_fundamental_form_norms))

    @property
    def max_curvature(self) -> float:
        return float(np.nanmax(self.induced_curvature))

    def to_json(self, include_grid=False):
        out = {
            "grid": list(self.points.shape[:2]),
            "extent": [float(self.s[-1]), float(self.w[-1])],
            "max_second_fundamental_form": self.max_ii,
            "max_induced_curvature": self.max_curvature,
        }
        if include_grid:
            out["points"] = self.points.tolist()
        return out


def _geodesic_with_transport(st: Spacetime, x0, v0, W0, times, rtol):
    """Geodesic from (x0, v0) with W0 parallel transported, sampled at ``times``.

    Each row of ``x0`` is an independent geodesic.  Returns arrays shaped
    ``(len(times), n, d)`` for positions, velocities and transported vectors.
    """
    x0 = np.atleast_2d(x0)
    n, d = x0.shape
    metric = st.metric

    def rhs(t, y):
        x, v, w = y[:, :d], y[:, d : 2 * d], y[:, 2 * d :]
        gamma = christoffel_array(metric, x)
        acc = -np.einsum("ncab,na,nb->nc", gamma, v, v)
        dw = -np.einsum("ncab,na,nb->nc", gamma, v, w)
        return np.concatenate([v, acc, dw], axis=1)

    margin = None
    if metric.domain_exprs:
        margin = lambda y: metric.domain_margin(y[:, :d])  # noqa: E731

    y = np.concatenate([x0, np.atleast_2d(v0), np.atleast_2d(W0)], axis=1)
    out = [y]
    t_prev = times[0]
    for t_next in times[1:]:
        res = dopri(rhs, t_prev, y, t_next, rtol=rtol, atol=rtol * 1e-2, constraint=margin)
        if np.any(res.status != DONE):
            raise DomainError(f"geodesic left the domain or failed before parameter {t_next:g}")
        y = res.y
        out.append(y)
        t_prev = t_next
    arr = np.stack(out)
    return arr[..., :d], arr[..., d : 2 * d], arr[..., 2 * d :]


def _fd(arr, axis, h, weights):
    """Apply a 5-point stencil along ``axis``; NaN where it does not fit."""
    arr = np.moveaxis(arr, axis, 0)
    out = np.full(arr.shape, np.nan)
    m = arr.shape[0]
    if m >= 5:
        acc = sum(wt * arr[j : m - 4 + j] for j, wt in enumerate(weights))
        out[2 : m - 2] = acc / h ** (2 if weights is _D2 else 1)
    return np.moveaxis(out, 0, axis)


def _mixed(arr, hs, hw):
    return _fd(_fd(arr, 0, hs, _D1), 1, hw, _D1)


def ruled_surface(st: Spacetime, p, Q, W, extent=(0.5, 0.5), grid=(21, 21), rtol=1e-12) -> SurfacePatch:
    """Patch ``(s, w) -> exp_{gamma(s)}(w P(s))``.

    ``gamma`` is the geodesic with initial velocity ``Q`` and ``P`` the parallel
    transport of ``W`` along it.  When ``W`` is a parallel field the w-curves are
    its orbits.
    """
    p, Q, W = (np.asarray(a, dtype=float) for a in (p, Q, W))
    m, k = grid
    L, S = extent
    s = np.linspace(0.0, L, m)
    w = np.linspace(0.0, S, k)
    base, _, P = _geodesic_with_transport(st, p, Q, W, s, rtol)
    base, P = base[:, 0], P[:, 0]
    x, _, _ = _geodesic_with_transport(st, base, P, np.zeros_like(P), w, rtol)
    X = np.transpose(x, (1, 0, 2))  # (m, k, d)
    hs, hw = s[1] - s[0], w[1] - w[0]
    Xs = _fd(X, 0, hs, _D1)
    Xw = _fd(X, 1, hw, _D1)
    Xss = _fd(X, 0, hs, _D2)
    Xww = _fd(X, 1, hw, _D2)
    Xsw = _mixed(X, hs, hw)
    ok = np.all(np.isfinite(Xs) & np.isfinite(Xw), axis=-1)
    ii = np.full((m, k), np.nan)
    curv = np.full((m, k), np.nan)
    idx = np.argwhere(ok)
    if len(idx):
        pts = X[ok]
        T1, T2 = Xs[ok], Xw[ok]
        _, gamma, riemann, _ = curvature_arrays(st.metric, pts)

        def nabla(Xab, A, B):
            return Xab + np.einsum("ncab,na,nb->nc", gamma, A, B)

        cov = [nabla(Xss[ok], T1, T1), nabla(Xsw[ok], T1, T2), nabla(Xww[ok], T2, T2)]
        # distance of each covariant derivative from span(T1, T2)
        basis = np.stack([T1, T2], axis=-1)  # (n, d, 2)
        q, _ = np.linalg.qr(basis)
        res = []
        for c in cov:
            proj = np.einsum("ndi,nei,ne->nd", q, q, c)
            res.append(np.linalg.norm(c - proj, axis=-1))
        ii[ok] = np.max(np.stack(res), axis=0)
        # R(T1, T2) T_j for j = 1, 2
        r1 = np.einsum("ndabc,na,nb,nc->nd", riemann, T1, T1, T2)
        r2 = np.einsum("ndabc,na,nb,nc->nd", riemann, T2, T1, T2)
        curv[ok] = np.maximum(np.linalg.norm(r1, axis=-1), np.linalg.norm(r2, axis=-1))
    return SurfacePatch(s, w, X, Xs, Xw, ii, curv)


def totally_geodesic_surface(st: Spacetime, p, Q, extent=(0.5, 0.5), grid=(21, 21), rtol=1e-12,
                             check_certificate=True) -> SurfacePatch:
    """Sweep the geodesic tangent to ``Q`` by the flow of V."""
    if st.V is None:
        raise BrinkmannError(f"{st.name} has no distinguished vector field")
    if check_certificate and not brinkmann_certificate(st).passed:
        raise BrinkmannError(f"{st.name} does not pass the Brinkmann certificate")
    p = np.asarray(p, dtype=float)
    Vp = st.V(p)
    Q = np.asarray(Q, dtype=float)
    if np.linalg.matrix_rank(np.stack([Q, Vp]), tol=1e-10 * max(1.0, np.linalg.norm(Q))) < 2:
        raise BrinkmannError("Q must be independent of V(p)")
    return ruled_surface(st, p, Q, Vp, extent, grid, rtol)


# -- frames of E = V-perp / V ---------------------------------------------------------


@dataclass
class FrameOnE:
    base: np.ndarray
    vectors: np.ndarray  # (n - 1, d) representatives in V-perp

    def to_json(self):
        return {"base": self.base.tolist(), "vectors": self.vectors.tolist()}


def _transversal(g, V):
    """A vector N with g(N, V) = 1."""
    gv = g @ V
    N = gv / np.dot(gv, gv)
    return N


def frame_on_E(st: Spacetime, p, vectors=None) -> FrameOnE:
    """g_E-orthonormal frame of V-perp / V at ``p``.

    Candidate vectors (default: coordinate basis) are projected into V-perp
    along a null transversal, then Gram-Schmidt orthonormalized modulo V.
    """
    if st.V is None:
        raise BrinkmannError(f"{st.name} has no distinguished vector field")
    p = np.asarray(p, dtype=float)
    g = st.metric.matrix(p)
    V = st.V(p)
    N = _transversal(g, V)
    cands = np.eye(st.dim) if vectors is None else np.atleast_2d(np.asarray(vectors, dtype=float))
    out = []
    for c in cands:
        x = c - (c @ g @ V) * N
        for e in out:
            x = x - (x @ g @ e) * e
        # strip the V component so representatives are canonical
        x = x - (x @ V) / (V @ V) * V
        nrm = x @ g @ x
        if nrm > 1e-10:
            out.append(x / np.sqrt(nrm))
        if len(out) == st.dim - 2:
            break
    if len(out) != st.dim - 2:
        raise BrinkmannError("candidate vectors do not span V-perp / V")
    return FrameOnE(p, np.array(out))


def frame_residuals(st: Spacetime, frame: FrameOnE):
    """``(max |g(e_i, V)|, max |Gram - I|)`` for a frame."""
    g = st.metric.matrix(frame.base)
    V = st.V(frame.base)
    e = frame.vectors
    gv = np.abs(e @ g @ V)
    gram = e @ g @ e.T
    return float(np.max(gv)), float(np.max(np.abs(gram - np.eye(len(e)))))


def modulo(vec, V):
    """Euclidean distance of ``vec`` from the line through ``V`` (rowwise)."""
    vec = np.atleast_2d(vec)
    return np.linalg.norm(vec - np.outer(vec @ V, V) / (V @ V), axis=-1)


@dataclass
class FrameTransport:
    frame: FrameOnE
    pushed: np.ndarray
    horizontality_residual: float
    gram_residual: float
    orthogonality_residual: float

    def to_json(self):
        return {
            "frame": self.frame.to_json(),
            "pushed": self.pushed.tolist(),
            "horizontality_residual": self.horizontality_residual,
            "gram_residual": self.gram_residual,
            "orthogonality_residual": self.orthogonality_residual,
        }


def flow(st: Spacetime, Y: VectorField, p, T, rtol=1e-12, samples=0):
    """Integrate ``x' = Y(x)`` with the variational equation from ``p`` for time ``T``.

    Returns ``(x(T), J(T))``; with ``samples > 0`` also the sample times, points
    and velocities for building a :class:`Curve`.
    """
    d = st.dim

    def rhs(t, y):
        x = y[:, :d]
        vals, jac = Y.jets(x)
        J = y[:, d:].reshape(-1, d, d)
        return np.concatenate([vals, (jac @ J).reshape(len(y), -1)], axis=1)

    y0 = np.concatenate([np.asarray(p, dtype=float), np.eye(d).ravel()])[None]
    times = np.linspace(0.0, T, samples + 1) if samples else np.array([0.0, T])
    ys = [y0[0]]
    y = y0
    margin = (lambda z: st.metric.domain_margin(z[:, :d])) if st.metric.domain_exprs else None
    for a, b in zip(times[:-1], times[1:]):
        if b == a:
            ys.append(y[0])
            continue
        res = dopri(rhs, a, y, b, rtol=rtol, atol=rtol * 1e-2, constraint=margin)
        if res.status[0] != DONE:
            raise DomainError(f"flow left the domain before time {b:g}")
        y = res.y
        ys.append(y[0])
    ys = np.array(ys)
    xT, JT = ys[-1, :d], ys[-1, d:].reshape(d, d)
    if samples:
        xs = ys[:, :d]
        return xT, JT, times, xs, Y(xs)
    return xT, JT


def frame_transport_along_V(st: Spacetime, frame: FrameOnE, t: float, rtol=1e-12) -> FrameTransport:
    """Parallel transport a frame of E along the V-orbit and compare with the flow pushforward."""
    if st.V is None:
        raise BrinkmannError(f"{st.name} has no distinguished vector field")
    if t == 0:
        return FrameTransport(frame, frame.vectors.copy(), 0.0, *frame_residuals(st, frame)[::-1])
    n_samples = max(16, int(abs(t) * 16))
    # backwards in time is forwards along -V
    Y = st.V if t > 0 else VectorField(st.coordinates, [dsl.Neg(e) for e in st.V.components])
    xT, JT, times, xs, vs = flow(st, Y, frame.base, abs(t), rtol=rtol, samples=n_samples)
    curve = Curve.from_samples(times, xs, vs)
    moved = parallel_transport(st.metric, curve, frame.vectors, rtol=rtol, atol=rtol * 1e-2).vector
    pushed = frame.vectors @ JT.T
    VT = st.V(xT)
    # representatives in V-perp, with the V component removed
    moved = moved - np.outer(moved @ VT, VT) / (VT @ VT)
    pushed_r = pushed - np.outer(pushed @ VT, VT) / (VT @ VT)
    out = FrameOnE(xT, moved)
    horiz = float(np.max(modulo(moved - pushed_r, VT)))
    orth, gram = frame_residuals(st, out)
    return FrameTransport(out, pushed, horiz, gram, orth)


# -- pp-wave Ricci ----------------------------------------------------------------------


@dataclass
class RicciHarmonicReport:
    H: str
    n: int
    samples: int
    max_ricci_residual: float
    max_laplacian_residual: float
    ratio_mean: float | None
    ratio_spread: float | None

    def to_json(self):
        return dict(self.__dict__)


def ppwave_ricci_harmonic(H: str, n: int = 2, samples: int = 64, seed: int = 0) -> RicciHarmonicReport:
    """Compare Ricci of the pp-wave with profile ``H`` against the transverse Laplacian of H.

    The chart coefficient of du^2 is 2H, so Ric = -(Delta_z H) du^2.
    """
    if n < 2:
        raise ValueError("need at least two transverse coordinates")
    st = build("pp_wave", {"H": H, "n": n})
    coords = st.coordinates
    sampler = qmc.Halton(n + 1, scramble=True, seed=seed)
    uz = 2.0 * sampler.random(samples) - 1.0
    x = np.zeros((samples, n + 2))
    x[:, 0] = uz[:, 0]
    x[:, 2:] = uz[:, 1:]
    _, _, _, ricci = curvature_arrays(st.metric, x)
    expr = dsl.parse_expr(str(H), coords)
    zs = coords[2:]
    bindings = {c: x[:, i] for i, c in enumerate(coords)}
    jet = dsl.eval_expr(expr, bindings, wrt=list(zs), order=2)
    hess = np.broadcast_to(jet.hess, (samples, n, n)) if np.ndim(jet.hess) == 2 else jet.hess
    lap = np.trace(hess, axis1=-2, axis2=-1) * np.ones(samples)
    ric_norm = np.max(np.abs(ricci), axis=(-1, -2))
    big = np.abs(lap) > 1e-12
    ratio = ricci[big, 0, 0] / lap[big]
    return RicciHarmonicReport(
        H=str(H),
        n=n,
        samples=samples,
        max_ricci_residual=float(np.max(ric_norm)),
        max_laplacian_residual=float(np.max(np.abs(lap))),
        ratio_mean=float(np.mean(ratio)) if ratio.size else None,
        ratio_spread=float(np.ptp(ratio)) if ratio.size else None,
    )


# -- norm growth ------------------------------------------------------------------------


@dataclass
class NormGrowthReport:
    eps: float
    C: float
    violations: int
    per_speed: dict
    trials: int

    def to_json(self):
        return {
            "eps": self.eps,
            "C": self.C,
            "violations": self.violations,
            "per_speed": {str(k): v for k, v in self.per_speed.items()},
            "trials": self.trials,
        }


def _norm_growth_samples(st: Spacetime, speed, trials, eps, seed, n_samples=32):
    """Ratios ||xdot(t)||_0 / ||xdot(0)||_0 on [0, eps/speed] for ``trials`` geodesics."""
    d = st.dim
    n = d - 2
    rng = np.random.default_rng(seed)
    u0 = rng.random(trials)
    dirs = rng.normal(size=(trials, n))
    x0 = np.zeros((trials, d))
    x0[:, 0] = u0
    x0[:, 2:] = rng.random((trials, n))
    h0 = st.metric.matrix(x0)[:, 2:, 2:]
    # unit transverse direction for h at the start point
    dirs /= np.sqrt(np.einsum("ni,nij,nj->n", dirs, h0, dirs))[:, None]
    v0 = np.zeros((trials, d))
    v0[:, 0] = 1.0
    v0[:, 2:] = speed * dirs
    T = eps / speed
    times = np.linspace(0.0, T, n_samples + 1)
    metric = st.metric

    def rhs(t, y):
        return np.concatenate([y[:, d:], geodesic_acceleration(metric, y[:, :d], y[:, d:])], axis=1)

    y = np.concatenate([x0, v0], axis=1)
    ratios = [np.ones(trials)]
    norm0 = np.sqrt(np.einsum("ni,nij,nj->n", v0[:, 2:], h0, v0[:, 2:]))
    for a, b in zip(times[:-1], times[1:]):
        res = dopri(rhs, a, y, b, rtol=1e-11, atol=1e-13)
        if np.any(res.status != DONE):
            raise BrinkmannError("integration failed in the norm-growth test")
        y = res.y
        xd = y[:, d + 2 :]
        ratios.append(np.sqrt(np.einsum("ni,nij,nj->n", xd, h0, xd)) / norm0)
    return times, np.stack(ratios, axis=1)


def norm_growth_bound(st: Spacetime, speeds=(1.0, 10.0, 100.0), trials: int = 20, eps: float = 0.1,
                      seed: int = 0, C: float | None = None) -> NormGrowthReport:
    """Fit C in ``||xdot(t)||_0 / ||xdot(0)||_0 <= 1 + C t`` on ``[0, eps/s0]``.

    With ``C`` given, only counts violations of the envelope ``1 + 1.05 C t``.
    Every speed reuses the same seeded base points and directions.
    """
    if st.chart_kind != "rosen":
        raise BrinkmannError(f"norm growth test needs a rosen chart, not {st.chart_kind}")
    if not st.claims_compact_quotient:
        raise BrinkmannError(f"{st.name} is not a compact quotient")
    data = {}
    per_speed = {}
    for s0 in speeds:
        t, r = _norm_growth_samples(st, float(s0), trials, eps, seed)
        data[s0] = (t, r)
        per_speed[float(s0)] = float(max(0.0, np.max((r[:, 1:] - 1.0) / t[1:])))
    fitted = max(per_speed.values()) if C is None else float(C)
    violations = 0
    for t, r in data.values():
        violations += int(np.sum(np.any(r > 1.0 + 1.05 * fitted * t + 1e-12, axis=1)))
    return NormGrowthReport(eps, fitted, violations, per_speed, trials)
