"""Batched Dormand-Prince 5(4) integrator with dense output.

Integrates ``N`` independent initial value problems at once.  Each row of the
batch carries its own time and step size; the right-hand side is evaluated on
the subset of rows still running, so one vectorized call serves every
trajectory.  Rows finish independently with a status code.

Hooks:

* ``constraint(y) -> margin`` must stay positive; when an accepted step
  crosses zero the crossing is located on the dense output and the row stops
  with :data:`LEFT`.
* ``step_cap(y) -> h_max`` bounds the step size per row.
* ``on_step(rows, t, y, h) -> (y, changed, stop)`` runs after every accepted
  step.  It may rewrite states (deck normalization), flagging ``changed`` rows
  so the first-same-as-last stage is recomputed, and may stop rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RUNNING, DONE, COLLAPSE, LEFT, STOPPED, FAILED = range(6)
STATUS_NAMES = {
    RUNNING: "running",
    DONE: "done",
    COLLAPSE: "step_collapse",
    LEFT: "left_domain",
    STOPPED: "stopped",
    FAILED: "failed",
}

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th order and embedded 4th order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Shampine's 4th order interpolant), rows are stages,
# columns multiply theta, theta^2, theta^3, theta^4
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


def dense_eval(y, h, K, theta):
    """Interpolated state at ``t + theta*h`` for a step with stages ``K``.

    ``y``: (n, m), ``h``: (n,), ``K``: (7, n, m), ``theta``: (n,).
    """
    powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)  # (n, 4)
    w = powers @ P.T  # (n, 7)
    return y + h[:, None] * np.einsum("ns,snm->nm", w, K)


@dataclass
class BatchResult:
    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    h: np.ndarray
    n_steps: np.ndarray
    n_rejected: np.ndarray


def _rms(x):
    return np.sqrt(np.mean(x * x, axis=-1))


@np.errstate(all="ignore")
def initial_step(rhs, t, y, f, t_end, rtol, atol, max_step):
    scale = atol + rtol * np.abs(y)
    d0 = _rms(y / scale)
    d1 = _rms(f / scale)
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h0 = np.minimum(h0, np.abs(t_end - t))
    y1 = y + h0[:, None] * f
    f1 = rhs(t + h0, y1)
    d2 = _rms((f1 - f) / scale) / np.maximum(h0, 1e-300)
    d2 = np.where(np.isfinite(d2), d2, 1e300)
    big = np.maximum(d1, d2)
    h1 = np.where(big <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(big, 1e-300)) ** 0.2)
    return np.minimum(np.minimum(100 * h0, h1), max_step)


def dopri(
    rhs,
    t0,
    y0,
    t_end,
    *,
    rtol=1e-10,
    atol=1e-12,
    min_step=1e-12,
    max_step=np.inf,
    h0=None,
    on_step=None,
    constraint=None,
    step_cap=None,
    max_steps=200_000,
) -> BatchResult:
    """Integrate ``y' = rhs(t, y)`` for every row of ``y0`` up to ``t_end``."""
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim != 2:
        raise ValueError("y0 must have shape (N, m)")
    n, _ = y.shape
    t = np.broadcast_to(np.asarray(t0, dtype=float), (n,)).copy()
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (n,)).copy()
    status = np.full(n, RUNNING)
    status[t >= t_end] = DONE
    steps = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)

    f = np.full_like(y, np.nan)
    rows = np.flatnonzero(status == RUNNING)
    if rows.size:
        f[rows] = rhs(t[rows], y[rows])
        bad = ~np.all(np.isfinite(f[rows]), axis=1)
        status[rows[bad]] = FAILED
    if h0 is None:
        h = np.zeros(n)
        rows = np.flatnonzero(status == RUNNING)
        if rows.size:
            h[rows] = initial_step(rhs, t[rows], y[rows], f[rows], t_end[rows], rtol, atol, max_step)
    else:
        h = np.broadcast_to(np.asarray(h0, dtype=float), (n,)).copy()
    h = np.maximum(h, min_step)

    while True:
        rows = np.flatnonzero(status == RUNNING)
        if rows.size == 0:
            break
        tr, yr = t[rows], y[rows]
        remaining = t_end[rows] - tr
        hr = h[rows]
        if step_cap is not None:
            hr = np.maximum(np.minimum(hr, step_cap(yr)), min_step)
        last = hr >= remaining
        hr = np.where(last, remaining, hr)
        Kr = np.empty((7,) + yr.shape)
        Kr[0] = f[rows]
        flat = Kr.reshape(7, -1)
        shape = yr.shape
        with np.errstate(all="ignore"):
            for s in range(1, 7):
                ys = yr + hr[:, None] * (A[s] @ flat[:s]).reshape(shape)
                Kr[s] = rhs(tr + C[s] * hr, ys)
            ynew = yr + hr[:, None] * (B[:6] @ flat[:6]).reshape(shape)
            err = hr[:, None] * (E @ flat).reshape(shape)
            scale = atol + rtol * np.maximum(np.abs(yr), np.abs(ynew))
            errn = _rms(err / scale)
        finite = np.all(np.isfinite(Kr), axis=(0, 2)) & np.isfinite(errn)
        errn = np.where(finite, errn, np.inf)
        accept = errn <= 1.0
        with np.errstate(divide="ignore"):
            factor = np.clip(0.9 * errn ** -0.2, 0.2, 5.0)
        factor = np.where(finite, factor, 0.2)

        # rejected rows shrink; too small a step is a collapse
        rej = rows[~accept]
        rejected[rej] += 1
        hnew_rej = hr[~accept] * np.minimum(factor[~accept], 0.9)
        collapsed = hnew_rej < min_step
        status[rej[collapsed]] = COLLAPSE
        h[rej] = np.maximum(hnew_rej, min_step)

        acc = rows[accept]
        if acc.size == 0:
            continue
        ia = np.flatnonzero(accept)
        ya, ha, ta = ynew[ia], hr[ia], tr[ia]
        Ka = Kr[:, ia]
        if constraint is not None:
            margin = constraint(ya)
            out = ~(margin > 0)
            if out.any():
                io = np.flatnonzero(out)
                theta = _locate(constraint, yr[ia[io]], ha[io], Ka[:, io])
                t[acc[io]] = ta[io] + theta * ha[io]
                y[acc[io]] = dense_eval(yr[ia[io]], ha[io], Ka[:, io], theta)
                status[acc[io]] = LEFT
                keep = ~out
                acc, ia, ya, ha, ta, Ka = acc[keep], ia[keep], ya[keep], ha[keep], ta[keep], Ka[:, keep]
        if acc.size == 0:
            continue
        tn = np.where(last[ia], t_end[acc], ta + ha)
        fa = Ka[6].copy()
        steps[acc] += 1
        if on_step is not None:
            ya, changed, stop = on_step(acc, tn, ya, ha)
            if changed is not None and np.any(changed):
                ic = np.flatnonzero(changed & ~stop)
                if ic.size:
                    fa[ic] = rhs(tn[ic], ya[ic])
            status[acc[stop]] = STOPPED
        t[acc] = tn
        y[acc] = ya
        f[acc] = fa
        hn = np.minimum(ha * factor[ia], max_step)
        # a step clipped to land on t_end says nothing about the next step size
        h[acc] = np.where(last[ia], np.maximum(h[acc], hn), hn)
        done = (tn >= t_end[acc]) & (status[acc] == RUNNING)
        status[acc[done]] = DONE
        shrunk = (h[acc] < min_step) & (status[acc] == RUNNING)
        status[acc[shrunk]] = COLLAPSE
        over = (steps[acc] >= max_steps) & (status[acc] == RUNNING)
        status[acc[over]] = FAILED
    return BatchResult(t, y, status, h, steps, rejected)


def _locate(constraint, y, h, K, iters=60):
    """Bisect the dense output for the first zero of ``constraint`` in (0, 1]."""
    lo = np.zeros(len(h))
    hi = np.ones(len(h))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m = constraint(dense_eval(y, h, K, mid))
        inside = m > 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return hi
