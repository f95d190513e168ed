"""Forward-mode jets: truncated Taylor numbers carrying exact derivatives.

A :class:`Jet` holds a value together with its gradient with respect to a
fixed set of directions and, optionally, its Hessian.  Arithmetic and the
elementary functions propagate derivatives by the chain rule, so evaluating
a formula on jets yields exact first (and second) partials, not finite
difference approximations.

Values may be numpy arrays of any batch shape ``S``; the gradient then has
shape ``S + (k,)`` and the Hessian ``S + (k, k)``.  Plain floats and arrays
of shape ``S`` mix freely with jets and act as constants.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")
    # make numpy defer to the reflected operators below instead of building object arrays
    __array_ufunc__ = None

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variable(cls, val, index, k, order=1):
        """Seed the ``index``-th of ``k`` independent directions at ``val``."""
        val = np.asarray(val, dtype=float)
        grad = np.zeros(val.shape + (k,))
        grad[..., index] = 1.0
        hess = np.zeros(val.shape + (k, k)) if order >= 2 else None
        return cls(val, grad, hess)

    @classmethod
    def constant(cls, val, k, order=1, shape=()):
        val = np.broadcast_to(np.asarray(val, dtype=float), shape).copy()
        grad = np.zeros(val.shape + (k,))
        hess = np.zeros(val.shape + (k, k)) if order >= 2 else None
        return cls(val, grad, hess)

    @property
    def order(self):
        return 1 if self.hess is None else 2

    def __repr__(self):
        return f"Jet(val={self.val!r}, grad={self.grad!r})"

    # -- chain rule for a scalar function f with derivatives f1, f2 --------

    def _chain(self, f0, f1, f2=None):
        grad = f1[..., None] * self.grad if np.ndim(f1) else f1 * self.grad
        hess = None
        if self.hess is not None:
            g = self.grad
            outer = g[..., :, None] * g[..., None, :]
            f1e = f1[..., None, None] if np.ndim(f1) else f1
            f2e = f2[..., None, None] if np.ndim(f2) else f2
            hess = f1e * self.hess + f2e * outer
        return Jet(f0, grad, hess)

    # -- arithmetic ------------------------------------------------------

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None else self.hess - other.hess
            return Jet(self.val - other.val, self.grad - other.grad, hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            o = np.asarray(other) if np.ndim(other) else other
            oe = o[..., None] if np.ndim(o) else o
            hess = None
            if self.hess is not None:
                hess = (o[..., None, None] if np.ndim(o) else o) * self.hess
            return Jet(self.val * o, self.grad * oe, hess)
        a, b = self, other
        av = a.val[..., None] if np.ndim(a.val) else a.val
        bv = b.val[..., None] if np.ndim(b.val) else b.val
        grad = a.grad * bv + b.grad * av
        hess = None
        if a.hess is not None:
            av2 = a.val[..., None, None] if np.ndim(a.val) else a.val
            bv2 = b.val[..., None, None] if np.ndim(b.val) else b.val
            cross = a.grad[..., :, None] * b.grad[..., None, :]
            hess = a.hess * bv2 + b.hess * av2 + cross + np.swapaxes(cross, -1, -2)
        return Jet(a.val * b.val, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self):
        x = self.val
        inv = 1.0 / x
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, other):
        if isinstance(other, Jet):
            return exp(other * log(self))
        return power(self, float(other))

    def __rpow__(self, other):
        return exp(self * np.log(other))


def power(x, c):
    """``x**c`` for a constant real exponent ``c``."""
    if not isinstance(x, Jet):
        return np.power(x, c)
    v = x.val
    f0 = np.power(v, c)
    ones = np.ones_like(f0)
    if c == 0.0:
        return x._chain(ones, 0.0 * ones, 0.0 * ones)
    if c == 1.0:
        return x._chain(f0, ones, 0.0 * ones)
    f1 = c * np.power(v, c - 1.0)
    f2 = 2.0 * ones if c == 2.0 else c * (c - 1.0) * np.power(v, c - 2.0)
    return x._chain(f0, f1, f2)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.val), np.cos(x.val)
    return x._chain(s, c, -s)


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.val), np.cos(x.val)
    return x._chain(c, -s, -c)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.val)
    return x._chain(e, e, e)


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    inv = 1.0 / x.val
    return x._chain(np.log(x.val), inv, -inv * inv)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    r = np.sqrt(x.val)
    d1 = 0.5 / r
    return x._chain(r, d1, -0.5 * d1 / x.val)


def tanh(x):
    if not isinstance(x, Jet):
        return np.tanh(x)
    t = np.tanh(x.val)
    d1 = 1.0 - t * t
    return x._chain(t, d1, -2.0 * t * d1)


def value(x):
    return x.val if isinstance(x, Jet) else x
