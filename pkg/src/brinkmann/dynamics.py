"""Flows of vector fields on quotients and their linearization.

The variational equation ``J' = DY(x) J`` is integrated with the orbit.  When
the orbit is mapped back into the fundamental domain by a deck element with
linear part L, the Jacobian becomes ``L J``: it is always the differential of
the flow read in fundamental-domain coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import Spacetime
from .errors import BrinkmannError, DomainError
from .geometry import VectorField
from .integrate import DONE, dopri

BOUNDED_MARGIN = 0.01
MAX_DISPLACEMENT = 1.0


@dataclass
class FlowState:
    point: np.ndarray
    jacobian: np.ndarray
    time: float

    def to_json(self):
        return {"point": self.point.tolist(), "jacobian": self.jacobian.tolist(), "time": self.time}


def as_field(st: Spacetime, spec) -> VectorField:
    """``None`` or ``"V"`` for the distinguished field, else a list of component expressions."""
    if spec is None or (isinstance(spec, str) and spec.strip() == "V"):
        if st.V is None:
            raise BrinkmannError(f"{st.name} has no distinguished vector field")
        return st.V
    if isinstance(spec, VectorField):
        return spec
    if isinstance(spec, str):
        spec = [c.strip() for c in spec.split(",")]
    return VectorField(st.coordinates, [str(c) for c in spec])


def flow_batch(st: Spacetime, Y: VectorField, x0, times, rtol=1e-10, normalize=True, max_word=64):
    """Points and Jacobians at each of ``times`` for orbits starting at rows of ``x0``.

    Returns ``(points (S, N, d), jacobians (S, N, d, d))``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    n, d = x0.shape
    quotient = normalize and not st.quotient.trivial

    def rhs(t, y):
        vals, jac = Y.jets(y[:, :d])
        J = y[:, d:].reshape(-1, d, d)
        return np.concatenate([vals, (jac @ J).reshape(len(y), -1)], axis=1)

    def on_step(rows, t, y, h):
        xn, lin, wl, ok = st.normalize_batch(y[:, :d], max_word)
        changed = (wl > 0) & ok
        if changed.any():
            y = y.copy()
            y[changed, :d] = xn[changed]
            J = y[changed, d:].reshape(-1, d, d)
            y[changed, d:] = (lin[changed] @ J).reshape(int(changed.sum()), -1)
        return y, changed, ~ok

    def cap(y):
        # cover at most a few fundamental domains per step so deck words stay short
        return MAX_DISPLACEMENT / np.maximum(np.linalg.norm(Y(y[:, :d]), axis=1), 1e-300)

    margin = None
    if st.metric.domain_exprs:
        margin = lambda y: st.metric.domain_margin(y[:, :d])  # noqa: E731

    y = np.concatenate([x0, np.broadcast_to(np.eye(d).ravel(), (n, d * d))], axis=1)
    if quotient:
        y, _, _ = on_step(np.arange(n), 0.0, y, None)
    out = [y]
    for a, b in zip(times[:-1], times[1:]):
        if b > a:
            res = dopri(rhs, a, y, b, rtol=rtol, atol=rtol * 1e-2, on_step=on_step if quotient else None,
                        constraint=margin, step_cap=cap if quotient else None)
            if np.any(res.status != DONE):
                bad = int(np.flatnonzero(res.status != DONE)[0])
                raise DomainError(f"flow from point {x0[bad].tolist()} left the domain before time {b:g}")
            y = res.y
        out.append(y)
    arr = np.stack(out)
    return arr[..., :d], arr[..., d:].reshape(len(times), n, d, d)


def integrate_flow(st: Spacetime, Y, p, T: float, rtol=1e-10) -> FlowState:
    """Flow ``p`` for time ``T`` along ``Y`` with the deck-corrected variational equation."""
    Y = as_field(st, Y)
    if T < 0:
        raise ValueError("T must be non-negative")
    pts, jacs = flow_batch(st, Y, p, np.array([0.0, T]), rtol=rtol)
    return FlowState(pts[-1, 0], jacs[-1, 0], float(T))


@dataclass
class EquicontinuityReport:
    times: np.ndarray
    log_norms: np.ndarray  # (N, S) log operator norms per sample orbit
    fitted_rate: float
    classification: str  # bounded | exponential_growth
    max_log_norm: float
    margin: float
    failures: list = field(default_factory=list)

    @property
    def samples(self):
        """(t, mean log-norm) pairs."""
        return list(zip(self.times.tolist(), np.mean(self.log_norms, axis=0).tolist()))

    def to_json(self, include_curves=True):
        out = {
            "classification": self.classification,
            "fitted_rate": self.fitted_rate,
            "max_log_norm": self.max_log_norm,
            "bounded_margin": self.margin,
            "n_orbits": int(self.log_norms.shape[0]),
            "failures": list(self.failures),
            "mean_curve": [[t, v] for t, v in self.samples],
        }
        if include_curves:
            out["curves"] = self.log_norms.tolist()
        return out


def equicontinuity_diagnostic(st: Spacetime, Y=None, N: int = 50, T: float = 100.0, seed: int = 0,
                              n_times: int = 101, margin: float = BOUNDED_MARGIN, rtol=1e-10) -> EquicontinuityReport:
    """Growth of the deck-corrected differential of the flow over ``[0, T]``.

    Bounded when the largest log operator norm stays below ``log(1 + margin)``;
    otherwise the rate is the slope of the mean log-norm over ``[T/2, T]``.
    """
    Y = as_field(st, Y)
    x0 = st.sample_points(N, seed=seed, method="halton")
    times = np.linspace(0.0, T, n_times)
    failures = []
    try:
        _, jacs = flow_batch(st, Y, x0, times, rtol=rtol)
        curves = np.log(np.linalg.norm(jacs, ord=2, axis=(-2, -1))).T
    except DomainError:
        # fall back to orbit by orbit so one escaping orbit does not sink the report
        rows = []
        for i, p in enumerate(x0):
            try:
                _, jac = flow_batch(st, Y, p, times, rtol=rtol)
                rows.append(np.log(np.linalg.norm(jac[:, 0], ord=2, axis=(-2, -1))))
            except DomainError as exc:
                failures.append({"index": i, "error": str(exc)})
        if not rows:
            raise
        curves = np.array(rows)
    mean = np.mean(curves, axis=0)
    late = times >= T / 2
    rate = float(np.polyfit(times[late], mean[late], 1)[0]) if late.sum() >= 2 else 0.0
    top = float(np.max(curves))
    kind = "bounded" if top < np.log1p(margin) else "exponential_growth"
    return EquicontinuityReport(times, curves, rate, kind, top, margin, failures)
