"""Geodesic integration, completeness verdicts and scans.

Trajectories of a batch are integrated together (one vectorized right-hand
side per Runge-Kutta stage).  After every accepted step the state is mapped
back into the fundamental domain of the quotient, so chart coordinates stay
bounded while the affine parameter runs on.  The reference norm for blow-up
tests is the Euclidean norm of chart components in the fundamental domain.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .catalog import Spacetime, load
from .errors import BrinkmannError, EvaluationError
from .geometry import christoffel_array, geodesic_acceleration, _point, check_nondegenerate
from .integrate import COLLAPSE, DONE, FAILED, LEFT, STOPPED, dopri

SCAN_CHUNK = 100
ESCAPE_WINDOW = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    min_step: float = 1e-12
    max_step: float = 1.0
    blowup_speed: float = 1e8
    max_deck_word: int = 64
    # chart distance a single step may cover, keeps deck words short
    max_displacement: float = 1.0
    max_steps: int = 500_000
    normalize: bool = True

    def __post_init__(self):
        if not (0 < self.min_step < self.max_step):
            raise ValueError("need 0 < min_step < max_step")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class GeodesicState:
    point: np.ndarray
    velocity: np.ndarray
    affine_param: float = 0.0


@dataclass
class CompletenessVerdict:
    kind: str  # complete | escape | left_domain | failure
    t_star: float
    horizon: float
    evidence: dict = field(default_factory=dict)

    def to_json(self):
        return {"kind": self.kind, "t_star": self.t_star, "horizon": self.horizon, "evidence": self.evidence}


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    conserved_drift: dict
    verdict: CompletenessVerdict
    growth_exponent: float
    n_steps: int
    n_rejected: int
    deck_events: int

    @property
    def samples(self):
        return [GeodesicState(p, w, float(s)) for s, p, w in zip(self.t, self.x, self.v)]

    def speed(self):
        return np.linalg.norm(self.v, axis=1)


# -- right-hand side ------------------------------------------------------------


def _acceleration(st: Spacetime, x, v):
    acc = geodesic_acceleration(st.metric, x, v)
    if st.chart_kind != "general":
        # u is affine along every geodesic in these charts
        if np.any(acc[..., 0] != 0):
            raise BrinkmannError(f"u-acceleration {np.max(np.abs(acc[..., 0])):.3g} is not zero")
    return acc


def batch_rhs(st: Spacetime):
    d = st.dim

    def rhs(t, y):
        x, v = y[:, :d], y[:, d:]
        try:
            with np.errstate(all="ignore"):
                acc = _acceleration(st, x, v)
        except EvaluationError:
            acc = np.full_like(v, np.nan)
            for r in range(len(y)):
                try:
                    with np.errstate(all="ignore"):
                        acc[r] = _acceleration(st, x[r], v[r])
                except EvaluationError:
                    pass
        return np.concatenate([v, acc], axis=1)

    return rhs


def geodesic_rhs(st: Spacetime, state: GeodesicState):
    """State derivative ``(xdot, -Gamma(xdot, xdot))``."""
    p = _point(st.metric, state.point)
    check_nondegenerate(st.metric.matrix(p))
    v = np.asarray(state.velocity, dtype=float)
    return np.concatenate([v, _acceleration(st, p, v)])


# -- integration ------------------------------------------------------------------


def clairaut(st: Spacetime, x, v):
    """g(xdot, V), or None without a distinguished field."""
    if st.V is None:
        return None
    return np.einsum("...a,...ab,...b->...", v, st.metric.matrix(x), st.V(x))


def energy(st: Spacetime, x, v):
    return np.einsum("...a,...ab,...b->...", v, st.metric.matrix(x), v)


def integrate_batch(st: Spacetime, x0, v0, T, cfg: IntegratorConfig | None = None, record=True):
    """Integrate geodesics from rows of ``x0``, ``v0`` on ``[0, T]``."""
    cfg = cfg or IntegratorConfig()
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    n, d = x0.shape
    if cfg.normalize and not st.quotient.trivial:
        x0, lin, _, ok = st.normalize_batch(x0, cfg.max_deck_word)
        if not np.all(ok):
            raise BrinkmannError("initial point cannot be normalized into the fundamental domain")
        v0 = np.einsum("nab,nb->na", lin, v0)
    if not np.all(st.metric.in_domain(x0)):
        raise BrinkmannError("initial point outside the chart domain")
    e0 = energy(st, x0, v0)
    c0 = clairaut(st, x0, v0)
    drift_e = np.zeros(n)
    drift_c = np.zeros(n) if c0 is not None else None
    deck_events = np.zeros(n, dtype=int)
    log = [(np.arange(n), np.zeros(n), np.concatenate([x0, v0], axis=1))] if record else []
    escape_like = np.zeros(n, dtype=bool)

    def on_step(rows, t, y, h):
        changed = np.zeros(len(rows), dtype=bool)
        stop = np.zeros(len(rows), dtype=bool)
        if cfg.normalize and not st.quotient.trivial:
            xn, lin, wl, ok = st.normalize_batch(y[:, :d], cfg.max_deck_word)
            changed = (wl > 0) & ok
            stop = ~ok
            if changed.any():
                y = y.copy()
                y[changed, :d] = xn[changed]
                y[changed, d:] = np.einsum("nab,nb->na", lin[changed], y[changed, d:])
                deck_events[rows[changed]] += 1
        x, v = y[:, :d], y[:, d:]
        with np.errstate(all="ignore"):
            de = np.abs(energy(st, x, v) - e0[rows])
            drift_e[rows] = np.fmax(drift_e[rows], de)
            if drift_c is not None:
                dc = np.abs(clairaut(st, x, v) - c0[rows])
                drift_c[rows] = np.fmax(drift_c[rows], dc)
        speed = np.linalg.norm(v, axis=1)
        # far beyond the blow-up threshold nothing useful remains to resolve
        runaway = ~(speed < cfg.blowup_speed * 1e6)
        escape_like[rows[runaway]] = True
        stop |= runaway
        if record:
            log.append((rows, t.copy(), y.copy()))
        return y, changed, stop

    margin = None
    if st.metric.domain_exprs:

        def margin(y):
            with np.errstate(all="ignore"):
                try:
                    return st.metric.domain_margin(y[:, :d])
                except EvaluationError:
                    return np.full(len(y), -1.0)

    step_cap = None
    if cfg.normalize and not st.quotient.trivial:
        step_cap = lambda y: cfg.max_displacement / np.maximum(np.linalg.norm(y[:, d:], axis=1), 1e-300)  # noqa: E731

    res = dopri(
        batch_rhs(st),
        0.0,
        np.concatenate([x0, v0], axis=1),
        T,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        min_step=cfg.min_step,
        max_step=cfg.max_step,
        on_step=on_step,
        constraint=margin,
        step_cap=step_cap,
        max_steps=cfg.max_steps,
    )
    if record:
        left = np.flatnonzero(res.status == LEFT)
        if left.size:
            log.append((left, res.t[left].copy(), res.y[left].copy()))
        rows = np.concatenate([r for r, _, _ in log])
        ts = np.concatenate([t for _, t, _ in log])
        ys = np.concatenate([y for _, _, y in log])
        order = np.argsort(rows, kind="stable")
        rows, ts, ys = rows[order], ts[order], ys[order]
        bounds = np.searchsorted(rows, np.arange(n + 1))
    out = []
    for i in range(n):
        if record:
            sl = slice(bounds[i], bounds[i + 1])
            t_i, x_i, v_i = ts[sl], ys[sl, :d], ys[sl, d:]
        else:
            t_i, x_i, v_i = np.array([0.0, res.t[i]]), np.stack([x0[i], res.y[i, :d]]), np.stack([v0[i], res.y[i, d:]])
        drifts = {"energy": float(drift_e[i]), "clairaut": None if drift_c is None else float(drift_c[i])}
        status = int(res.status[i])
        if status == STOPPED and escape_like[i]:
            status = COLLAPSE
        verdict = classify(status, t_i, v_i, float(res.t[i]), float(T), cfg)
        out.append(
            Trajectory(
                t=t_i,
                x=x_i,
                v=v_i,
                conserved_drift=drifts,
                verdict=verdict,
                growth_exponent=growth_exponent(t_i, np.linalg.norm(v_i, axis=1)),
                n_steps=int(res.n_steps[i]),
                n_rejected=int(res.n_rejected[i]),
                deck_events=int(deck_events[i]),
            )
        )
    return out


def integrate_geodesic(st: Spacetime, init: GeodesicState, T: float, cfg: IntegratorConfig | None = None) -> Trajectory:
    if T <= 0:
        raise ValueError("T must be positive")
    traj = integrate_batch(st, np.asarray(init.point)[None], np.asarray(init.velocity)[None], T, cfg)[0]
    if init.affine_param:
        traj.t = traj.t + init.affine_param
        traj.verdict.t_star += init.affine_param
        traj.verdict.horizon += init.affine_param
    return traj


# -- verdicts -------------------------------------------------------------------


def fit_blowup(t, speed, max_points=400):
    """Fit ``speed ~ k (t_star - t)^p`` to the tail of a trajectory.

    Uses the samples in the upper part of the log-speed range, scans candidate
    escape times beyond the last sample and refines the best one.  Returns
    ``(p, t_star)``.
    """
    t = np.asarray(t, dtype=float)
    speed = np.asarray(speed, dtype=float)
    good = np.isfinite(speed) & (speed > 0) & np.isfinite(t)
    t, speed = t[good], speed[good]
    if len(t) < 5:
        return float("nan"), float("nan")
    log_s = np.log(speed)
    level = log_s[-1] - 0.8 * (log_s[-1] - np.min(log_s))
    start = np.flatnonzero(log_s < level)
    first = start[-1] + 1 if start.size else 0
    idx = np.arange(first, len(t))
    if len(idx) < 5:
        idx = np.arange(max(0, len(t) - 5), len(t))
    if len(idx) > max_points:
        idx = idx[np.linspace(0, len(idx) - 1, max_points).round().astype(int)]
    tt, ls = t[idx], log_s[idx]
    t_last = tt[-1]
    ulp = np.spacing(max(1.0, abs(t_last)))

    def fit(log_delta):
        gap = (t_last - tt) + np.exp(log_delta)
        lx = np.log(gap)
        A = np.stack([np.ones_like(lx), lx], axis=1)
        coef, *_ = np.linalg.lstsq(A, ls, rcond=None)
        return float(np.sum((A @ coef - ls) ** 2)), float(coef[1])

    lo = np.log(64 * ulp)
    hi = np.log(max(10 * (t_last - tt[0]), 128 * ulp))
    grid = np.linspace(lo, hi, 300)
    res = [fit(g)[0] for g in grid]
    k = int(np.argmin(res))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if b > a:
        best = minimize_scalar(lambda g: fit(g)[0], bounds=(a, b), method="bounded", options={"xatol": 1e-6})
        g = float(best.x) if best.fun <= res[k] else grid[k]
    else:
        g = grid[k]
    return fit(g)[1], t_last + math.exp(g)


def classify(status, t, v, t_end, T, cfg: IntegratorConfig) -> CompletenessVerdict:
    speed = np.linalg.norm(v, axis=1)
    final_speed = float(speed[-1]) if len(speed) else float("nan")
    if status == DONE:
        return CompletenessVerdict("complete", T, T, {"final_speed": final_speed})
    if status == LEFT:
        return CompletenessVerdict("left_domain", t_end, T, {"final_speed": final_speed})
    evidence = {"final_speed": final_speed, "status": {COLLAPSE: "step_collapse", FAILED: "failed", STOPPED: "stopped"}.get(status, "failed")}
    if status == COLLAPSE and final_speed > cfg.blowup_speed:
        p, t_star = fit_blowup(t, speed)
        evidence.update(exponent=float(p), t_extrapolated=float(t_star))
        # a finite-time singularity leaves almost no parameter time after the stop;
        # exponential growth fits with a distant t_star and is not an escape
        near = np.isfinite(t_star) and t_star - t_end < ESCAPE_WINDOW * (1.0 + abs(t_end))
        if np.isfinite(p) and p < -0.5 and near:
            return CompletenessVerdict("escape", float(min(t_star, T)), T, evidence)
    return CompletenessVerdict("failure", t_end, T, evidence)


def growth_exponent(t, speed):
    """Slope of log speed against log t over the latter part of a trajectory."""
    t = np.asarray(t, dtype=float)
    speed = np.asarray(speed, dtype=float)
    ok = (t > 0) & np.isfinite(speed) & (speed > 0)
    t, speed = t[ok], speed[ok]
    if len(t) < 3:
        return 0.0
    keep = t >= t[-1] / 10
    if keep.sum() < 3:
        keep = np.ones_like(t, dtype=bool)
    lt, ls = np.log(t[keep]), np.log(speed[keep])
    if np.ptp(lt) == 0:
        return 0.0
    return float(np.polyfit(lt, ls, 1)[0])


# -- scans ----------------------------------------------------------------------


def random_initial_condition(st: Spacetime, seed: int, index: int):
    """Deterministic initial condition for trajectory ``index`` of a seeded scan."""
    rng = np.random.default_rng([seed, index])
    for _ in range(1000):
        x = st.map_unit(rng.random((1, st.dim)))
        if st.metric.in_domain(x)[0]:
            break
    else:
        raise BrinkmannError("could not sample a point inside the domain")
    v = rng.normal(size=st.dim)
    return x[0], v / np.linalg.norm(v)


def _scan_chunk(doc, indices, inits, T, cfg):
    st = load(doc)
    x0 = np.array([inits[i][0] for i in range(len(indices))])
    v0 = np.array([inits[i][1] for i in range(len(indices))])
    trajs = integrate_batch(st, x0, v0, T, cfg, record=True)
    return [_row(i, x, v, tr) for i, x, v, tr in zip(indices, x0, v0, trajs)]


def _row(index, x0, v0, tr: Trajectory):
    return {
        "index": int(index),
        "init_point": x0.tolist(),
        "init_velocity": v0.tolist(),
        "verdict": tr.verdict.kind,
        "t_star": tr.verdict.t_star,
        "energy_drift": tr.conserved_drift["energy"],
        "clairaut_drift": tr.conserved_drift["clairaut"],
        "growth_exponent": tr.growth_exponent,
        "blowup_exponent": tr.verdict.evidence.get("exponent"),
        "n_steps": tr.n_steps,
    }


def default_jobs():
    env = os.environ.get("BRINKMANN_JOBS")
    if env:
        return max(1, int(env))
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def completeness_scan(st: Spacetime, N: int, T: float, cfg: IntegratorConfig | None = None, seed: int = 0,
                      jobs: int = 1, sampler=None) -> dict:
    """Integrate ``N`` seeded random geodesics and summarize their verdicts.

    ``sampler(st, seed, index) -> (x, v)`` overrides the default initial
    conditions.  Work is cut into fixed chunks so results do not depend on
    ``jobs``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    cfg = cfg or IntegratorConfig()
    sampler = sampler or random_initial_condition
    inits = [sampler(st, seed, i) for i in range(N)]
    doc = st.spec.to_document()
    chunks = [list(range(a, min(a + SCAN_CHUNK, N))) for a in range(0, N, SCAN_CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_scan_chunk, doc, c, [inits[i] for i in c], T, cfg) for c in chunks]
            parts = [f.result() for f in futures]
    else:
        parts = []
        for c in chunks:
            x0 = np.array([inits[i][0] for i in c])
            v0 = np.array([inits[i][1] for i in c])
            trajs = integrate_batch(st, x0, v0, T, cfg, record=True)
            parts.append([_row(i, x, v, tr) for i, x, v, tr in zip(c, x0, v0, trajs)])
    rows = [r for part in parts for r in part]
    kinds = [r["verdict"] for r in rows]
    escapes = [{"index": r["index"], "t_star": r["t_star"], "exponent": r["blowup_exponent"]} for r in rows if r["verdict"] == "escape"]
    clair = [r["clairaut_drift"] for r in rows if r["clairaut_drift"] is not None]
    return {
        "spacetime": st.name,
        "seed": seed,
        "samples": N,
        "horizon": T,
        "summary": {
            "fraction_complete": kinds.count("complete") / N,
            "counts": {k: kinds.count(k) for k in ("complete", "escape", "left_domain", "failure")},
            "escapes": escapes,
            "max_growth_exponent": max(r["growth_exponent"] for r in rows),
            "max_energy_drift": max(r["energy_drift"] for r in rows),
            "max_clairaut_drift": max(clair) if clair else None,
        },
        "trajectories": rows,
    }


# -- mechanical form ----------------------------------------------------------------


@dataclass
class MechanicalForm:
    A: np.ndarray
    B: np.ndarray
    connection: np.ndarray
    acceleration: np.ndarray

    def residual(self, xdot):
        """Max difference between the transverse geodesic acceleration and conn + A xdot + B."""
        return float(np.max(np.abs(self.acceleration - (self.connection + self.A @ xdot + self.B))))


def mechanical_form(st: Spacetime, t: float, x, xdot, clairaut_const: float = 1.0, v: float = 0.0) -> MechanicalForm:
    """Transverse geodesic equation as a perturbed geodesic equation of h_t.

    Along a geodesic with g(xdot, V) = c in a Brinkmann or Rosen chart, u = t
    up to the affine factor c and the transverse coordinates satisfy::

        xddot^k = -Gamma^k_ij xdot^i xdot^j + A_ki xdot^i + B_k

    with ``A_ki = -2 c Gamma^k_iu`` and ``B_k = -c^2 Gamma^k_uu``.  The first
    term is the Levi-Civita connection of the transverse metric h_t.
    """
    if st.chart_kind not in ("brinkmann", "rosen"):
        raise BrinkmannError(f"mechanical form needs a brinkmann or rosen chart, not {st.chart_kind}")
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    c = float(clairaut_const)
    p = np.concatenate([[t, v], x])
    gamma = christoffel_array(st.metric, p)
    T_ = slice(2, None)
    A = -2.0 * c * gamma[T_, T_, 0]
    B = -c * c * gamma[T_, 0, 0]
    conn = -np.einsum("kij,i,j->k", gamma[T_, T_, T_], xdot, xdot)
    # the v-velocity does not enter the transverse equations
    vel = np.concatenate([[c, 0.0], xdot])
    acc = geodesic_acceleration(st.metric, p, vel)[T_]
    return MechanicalForm(A, B, conn, acc)


__all__ = [
    "IntegratorConfig",
    "GeodesicState",
    "CompletenessVerdict",
    "Trajectory",
    "MechanicalForm",
    "geodesic_rhs",
    "integrate_geodesic",
    "integrate_batch",
    "completeness_scan",
    "mechanical_form",
    "clairaut",
    "energy",
    "fit_blowup",
]
