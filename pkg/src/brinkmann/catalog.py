"""Example spacetimes and quotient handling.

Every catalog entry is produced as a spacetime document (see
:mod:`brinkmann.spec`) and compiled through the same path as user files.

Quotients are normalized with the structure recorded in
``fundamental_domain``: a homothety generator (shell domain
``1 <= max |x_S| < factor``), a twist generator (slab ``0 <= x_c < period``)
and pure lattice translations (unit cell in lattice coordinates), applied in
that order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import qmc

from .dsl import parse_expr
from .errors import CatalogError, NormalizationError, SpecError
from .geometry import MetricField, VectorField, is_lorentzian, signature
from .spec import DeckTransform, SpacetimeSpec, load_spacetime_spec

DEFAULT_MAX_WORD = 64


class Quotient:
    """Normalizer into the fundamental domain of an affine deck group."""

    def __init__(self, deck: list[DeckTransform], fd: dict, dim: int):
        self.dim = dim
        self.homothety = None
        self.twist = None
        self.lattice = None
        h = fd.get("homothety")
        if h is not None:
            diag = np.diag(deck[h].linear)
            subset = np.flatnonzero(diag != 1.0)
            self.homothety = (h, float(diag[subset[0]]), subset)
        t = fd.get("twist")
        if t is not None:
            g = deck[t]
            c = int(np.flatnonzero(g.translation)[0])
            self.twist = (t, c, float(g.translation[c]), g.linear, np.linalg.inv(g.linear))
        lat = fd.get("lattice") or []
        if lat:
            T = np.stack([deck[i].translation for i in lat], axis=1)  # (d, r)
            rows = np.flatnonzero(np.any(T != 0, axis=1))
            if len(rows) != len(lat):
                raise SpecError("lattice generators must span exactly the coordinates they move", "fundamental_domain.lattice")
            TS = T[rows]
            if abs(np.linalg.det(TS)) < 1e-12:
                raise SpecError("lattice generators are linearly dependent", "fundamental_domain.lattice")
            self.lattice = (list(lat), rows, TS, np.linalg.inv(TS))
            if self.twist is not None:
                L = self.twist[3]
                image = np.linalg.inv(TS) @ (L @ T)[rows]
                if not np.allclose(image, np.round(image), atol=1e-8):
                    raise SpecError("twist does not preserve the lattice", "fundamental_domain")

    @property
    def trivial(self):
        return self.homothety is None and self.twist is None and self.lattice is None

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        if self.homothety is not None:
            _, f, S = self.homothety
            m = np.max(np.abs(x[..., S]), axis=-1)
            ok &= (m >= 1.0) & (m < f)
        if self.twist is not None:
            _, c, P, _, _ = self.twist
            ok &= (x[..., c] >= 0) & (x[..., c] < P)
        if self.lattice is not None:
            _, rows, _, TSinv = self.lattice
            n = x[..., rows] @ TSinv.T
            ok &= np.all((n >= 0) & (n < 1), axis=-1)
        return ok

    def normalize(self, x):
        """Batch normalization of points ``x`` (n, d).

        Returns ``(x', lin, word, ok)`` where ``lin`` (n, d, d) is the derivative
        of the applied deck element, ``word`` (n, r) holds the generator exponents
        in the order homothety, twist, lattice..., and ``ok`` flags rows that
        could be normalized.
        """
        x = np.array(x, dtype=float, copy=True)
        n, d = x.shape
        lin = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        cols = []
        ok = np.all(np.isfinite(x), axis=1)
        if self.homothety is not None:
            _, f, S = self.homothety
            m = np.max(np.abs(x[:, S]), axis=1)
            good = ok & (m > 0)
            k = np.zeros(n)
            with np.errstate(divide="ignore", invalid="ignore"):
                k[good] = np.floor(np.log(m[good]) / math.log(f))
            scale = f ** (-k)
            x[:, S] *= scale[:, None]
            # repair rounding at the shell boundary
            for _ in range(2):
                m = np.max(np.abs(x[:, S]), axis=1)
                lo = good & (m < 1.0)
                hi = good & (m >= f)
                x[np.ix_(lo, S)] *= f
                scale[lo] *= f
                k[lo] -= 1
                x[np.ix_(hi, S)] /= f
                scale[hi] /= f
                k[hi] += 1
            lin[:, S, S] = scale[:, None]
            ok &= good
            cols.append(-k)
        if self.twist is not None:
            _, c, P, L, Linv = self.twist
            k = np.floor(x[:, c] / P)
            k[~ok] = 0
            for j in np.flatnonzero(k):
                M = np.linalg.matrix_power(Linv if k[j] > 0 else L, int(abs(k[j])))
                x[j] = M @ x[j]
                x[j, c] -= k[j] * P
                lin[j] = M @ lin[j]
            cols.append(-k)
        if self.lattice is not None:
            _, rows, TS, TSinv = self.lattice
            coeff = x[:, rows] @ TSinv.T
            nfl = np.floor(coeff)
            nfl[~ok] = 0
            x[:, rows] -= nfl @ TS.T
            # floor of a value just below an integer can land on the upper face
            coeff = x[:, rows] @ TSinv.T
            fix = np.floor(coeff)
            x[:, rows] -= fix @ TS.T
            nfl += fix
            for j in range(nfl.shape[1]):
                cols.append(-nfl[:, j])
        word = np.stack(cols, axis=1) if cols else np.zeros((n, 0))
        return x, lin, word, ok

    def generator_labels(self):
        labels = []
        if self.homothety is not None:
            labels.append(self.homothety[0])
        if self.twist is not None:
            labels.append(self.twist[0])
        if self.lattice is not None:
            labels.extend(self.lattice[0])
        return labels


@dataclass
class Spacetime:
    spec: SpacetimeSpec
    metric: MetricField
    V: VectorField | None
    deck: list[DeckTransform]
    quotient: Quotient
    flags: dict[str, bool]
    description: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self):
        return self.spec.name

    @property
    def dim(self):
        return self.metric.dim

    @property
    def coordinates(self):
        return self.metric.coordinates

    @property
    def chart_kind(self):
        return self.spec.chart_kind

    @property
    def claims_brinkmann(self):
        return self.flags.get("claims_brinkmann", False)

    @property
    def claims_compact_quotient(self):
        return self.flags.get("claims_compact_quotient", False)

    def vector_field(self, components):
        return VectorField(self.coordinates, components)

    # -- quotient ----------------------------------------------------------

    def normalize_batch(self, x, max_word=DEFAULT_MAX_WORD):
        x = np.asarray(x, dtype=float)
        if self.quotient.trivial:
            n, d = x.shape
            return x.copy(), np.broadcast_to(np.eye(d), (n, d, d)).copy(), np.zeros(n), np.ones(n, dtype=bool)
        n, d = x.shape
        xn = x.copy()
        lin = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        length = np.zeros(n)
        ok = np.ones(n, dtype=bool)
        out = np.flatnonzero(~self.quotient.contains(x))
        if out.size:
            xo, lo, word, oko = self.quotient.normalize(x[out])
            xn[out], lin[out] = xo, lo
            length[out] = np.sum(np.abs(word), axis=1)
            ok[out] = oko & (length[out] <= max_word)
        return xn, lin, length, ok

    def normalize(self, p, vs=(), max_word=DEFAULT_MAX_WORD):
        """Bring ``p`` into the fundamental domain, pushing ``vs`` forward.

        Returns ``(p', [v'...], word)`` with ``word`` a list of
        ``(deck generator index, exponent)`` pairs, applied in order.
        """
        p = np.asarray(p, dtype=float)
        if self.quotient.trivial:
            return p.copy(), [np.asarray(v, dtype=float).copy() for v in vs], []
        xn, lin, word, ok = self.quotient.normalize(p[None, :])
        length = float(np.sum(np.abs(word)))
        if not ok[0]:
            raise NormalizationError(f"point {p.tolist()} cannot be normalized")
        if length > max_word:
            raise NormalizationError(f"deck word length {length:.0f} exceeds bound {max_word}")
        labels = self.quotient.generator_labels()
        w = [(labels[i], int(word[0, i])) for i in range(word.shape[1]) if word[0, i] != 0]
        return xn[0], [lin[0] @ np.asarray(v, dtype=float) for v in vs], w

    def in_fundamental_domain(self, x):
        return self.quotient.contains(x) & self.metric.in_domain(x)

    # -- sampling ------------------------------------------------------------

    def box(self):
        if self.spec.sample_box is not None:
            return self.spec.sample_box
        return np.tile([-1.0, 1.0], (self.dim, 1))

    def map_unit(self, w):
        """Map points of the unit cube (n, d) into the fundamental domain / sample box."""
        w = np.asarray(w, dtype=float)
        box = self.box()
        x = box[:, 0] + w * (box[:, 1] - box[:, 0])
        q = self.quotient
        if q.homothety is not None:
            _, f, S = q.homothety
            k = len(S)
            rho = f ** w[:, S[0]]
            face = np.minimum((w[:, S[1 % k]] * 2 * k).astype(int), 2 * k - 1) if k > 1 else np.zeros(len(w), int)
            pts = np.zeros((len(w), k))
            # remaining coordinates in [-1, 1) from a scrambled reuse of the face draw
            frac = (w[:, S[1 % k]] * 2 * k) % 1.0 if k > 1 else w[:, S[0]]
            for j in range(k):
                pts[:, j] = 2 * ((frac * (j + 2) * 1.6180339887498949) % 1.0) - 1
            idx = face // 2
            sign = np.where(face % 2 == 0, 1.0, -1.0)
            pts[np.arange(len(w)), idx] = sign
            x[:, S] = rho[:, None] * pts
        if q.twist is not None:
            _, c, P, _, _ = q.twist
            x[:, c] = w[:, c] * P
        if q.lattice is not None:
            _, rows, TS, _ = q.lattice
            x[:, rows] = w[:, rows] @ TS.T
        return x

    def sample_points(self, n, seed=0, method="halton"):
        """``n`` points in the fundamental domain (or sample box), inside the chart domain."""
        out = []
        need = n
        if method == "halton":
            sampler = qmc.Halton(self.dim, scramble=True, seed=seed)
            draw = sampler.random
        else:
            rng = np.random.default_rng(seed)
            draw = lambda m: rng.random((m, self.dim))  # noqa: E731
        for _ in range(100):
            x = self.map_unit(draw(max(2 * need, 8)))
            x = x[self.metric.in_domain(x)]
            out.append(x[:need])
            need -= len(out[-1])
            if need <= 0:
                break
        pts = np.concatenate(out)
        if len(pts) < n:
            raise CatalogError("could not sample enough points inside the domain")
        return pts

    # -- checks ------------------------------------------------------------

    def deck_residuals(self, n=20, seed=0):
        """Max isometry and inverse-composition residuals over the deck generators."""
        pts = self.sample_points(n, seed)
        iso = 0.0
        comp = 0.0
        g = self.metric.matrix(pts)
        for t in self.deck:
            img = t(pts)
            gi = self.metric.matrix(img)
            pulled = np.einsum("ba,nbc,cd->nad", t.linear, gi, t.linear)
            iso = max(iso, float(np.max(np.abs(pulled - g))))
            back = t.inverse()(img)
            comp = max(comp, float(np.max(np.abs(back - pts))))
        return iso, comp

    def base_signature(self):
        p = self.sample_points(1, seed=12345)[0]
        return signature(self.metric.matrix(p))


# -- catalog ------------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    kind: str
    default: Any
    help: str


@dataclass(frozen=True)
class Entry:
    key: str
    description: str
    params: tuple[Param, ...]
    builder: Callable[..., dict]


def _brinkmann_doc(name, coords, coefficients, **extra):
    doc = {
        "name": name,
        "chart_kind": "brinkmann",
        "dimension": len(coords),
        "coordinates": coords,
        "coefficients": coefficients,
        "flags": {"claims_brinkmann": True, "claims_compact_quotient": False},
    }
    doc.update(extra)
    return doc


def _minkowski(n=2):
    n = int(n)
    if n < 2:
        raise CatalogError("minkowski needs n >= 2 (dimension n + 1 >= 3)")
    coords = ["u", "v"] + [f"x{i}" for i in range(1, n)]
    return _brinkmann_doc("minkowski", coords, {}, params={"n": n})


def _clifton_pohl():
    conf = "1/(2*(x^2 + y^2))"
    return {
        "name": "clifton_pohl",
        "chart_kind": "general",
        "dimension": 2,
        "coordinates": ["x", "y"],
        "coefficients": {"x,y": conf},
        "field": None,
        "deck": [{"linear": [[2, 0], [0, 2]], "translation": [0, 0]}],
        "fundamental_domain": {"homothety": 0},
        "domain": ["x^2 + y^2"],
        "sample_box": [[-2, 2], [-2, 2]],
        "flags": {"claims_brinkmann": False, "claims_compact_quotient": True},
    }


def _clifton_pohl_3d():
    # dx dz and dy dz carry 1/r instead of 1/r^2 so that (2x, 2y, z) is an isometry
    return {
        "name": "clifton_pohl_3d",
        "chart_kind": "general",
        "dimension": 3,
        "coordinates": ["x", "y", "z"],
        "coefficients": {
            "x,y": "1/(2*(x^2 + y^2))",
            "x,z": "1/(2*sqrt(x^2 + y^2))",
            "y,z": "1/(2*sqrt(x^2 + y^2))",
        },
        "field": ["0", "0", "1"],
        "deck": [
            {"linear": [[2, 0, 0], [0, 2, 0], [0, 0, 1]], "translation": [0, 0, 0]},
            {"linear": np.eye(3).tolist(), "translation": [0, 0, 1]},
        ],
        "fundamental_domain": {"homothety": 0, "lattice": [1]},
        "domain": ["x^2 + y^2"],
        "sample_box": [[-2, 2], [-2, 2], [0, 1]],
        "flags": {"claims_brinkmann": False, "claims_compact_quotient": True},
    }


def _half_plane():
    return {
        "name": "half_plane",
        "chart_kind": "general",
        "dimension": 2,
        "coordinates": ["x", "y"],
        "coefficients": {"x,y": "1"},
        "field": ["1", "0"],
        "domain": ["y"],
        "sample_box": [[-1, 1], [0.1, 2]],
        "flags": {"claims_brinkmann": True, "claims_compact_quotient": False},
    }


def _pp_wave(H="z1^2 - z2^2", n=2):
    n = int(n)
    if n < 1:
        raise CatalogError("pp_wave needs n >= 1 transverse coordinates")
    coords = ["u", "v"] + [f"z{i}" for i in range(1, n + 1)]
    try:
        h = parse_expr(str(H), coords)
    except Exception as exc:
        raise CatalogError(f"invalid H expression: {exc}") from exc
    if "v" in {c for c in coords if c in str(H)} and "v" in _vars(h):
        raise CatalogError("H must not depend on v")
    return _brinkmann_doc("pp_wave", coords, {"H": f"2*({H})"}, params={"H": str(H), "n": n})


def _vars(e):
    from .dsl import variables

    return variables(e)


def _quadratic(lambdas):
    return " + ".join(f"({float(l)!r})*z{i}^2" for i, l in enumerate(lambdas, start=1))


def _cahen_wallach(lambdas=(-1.0, -1.0)):
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise CatalogError("cahen_wallach needs at least one eigenvalue")
    doc = _pp_wave(_quadratic(lambdas), len(lambdas))
    doc["name"] = "cahen_wallach"
    doc["params"] = {"lambdas": lambdas}
    return doc


def _rosen_torus(alpha=(("2 + sin(2*pi*u)", "0"), ("0", "1")), lattice=None):
    alpha = [[str(a) for a in row] for row in alpha]
    n = len(alpha)
    if n < 1 or any(len(r) != n for r in alpha):
        raise CatalogError("alpha must be a square matrix of expressions")
    coords = ["u", "v"] + [f"z{i}" for i in range(1, n + 1)]
    lam = np.eye(n + 1) if lattice is None else np.asarray(lattice, dtype=float)
    if lam.shape != (n + 1, n + 1) or abs(np.linalg.det(lam)) < 1e-12:
        raise CatalogError(f"lattice must be an invertible {(n + 1)}x{(n + 1)} matrix acting on (v, z)")
    coefficients = {}
    for i in range(n):
        for j in range(i, n):
            a_ij = parse_expr(alpha[i][j], coords)
            a_ji = parse_expr(alpha[j][i], coords)
            if a_ij != a_ji:
                raise CatalogError(f"alpha must be symmetric (entries {i + 1},{j + 1})")
            if _vars(a_ij) - {"u"}:
                raise CatalogError("alpha may depend on u only")
            if alpha[i][j].strip() != ("1" if i == j else "0"):
                coefficients[f"g_{i + 1}_{j + 1}"] = alpha[i][j]
    d = n + 2
    deck = [{"linear": np.eye(d).tolist(), "translation": [1.0] + [0.0] * (d - 1)}]
    for k in range(n + 1):
        t = [0.0, *lam[:, k].tolist()]
        deck.append({"linear": np.eye(d).tolist(), "translation": t})
    return {
        "name": "rosen_torus",
        "chart_kind": "rosen",
        "dimension": d,
        "coordinates": coords,
        "coefficients": coefficients,
        "deck": deck,
        "fundamental_domain": {"twist": 0, "lattice": list(range(1, n + 2))},
        "flags": {"claims_brinkmann": True, "claims_compact_quotient": True},
        "params": {"alpha": alpha, "lattice": lam.tolist()},
    }


def anosov_eigen(A):
    """Expanding eigenvalue and eigenvector basis (columns: expanding, contracting)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.all(A == np.round(A)):
        raise CatalogError("A must be an integer 2x2 matrix")
    if round(np.linalg.det(A)) != 1:
        raise CatalogError("A must have determinant 1 (A in SL(2, Z))")
    if abs(np.trace(A)) <= 2:
        raise CatalogError(f"A is not hyperbolic: |trace| = {abs(np.trace(A)):g} <= 2")
    tr = np.trace(A)
    lam = (tr + math.copysign(math.sqrt(tr * tr - 4.0), tr)) / 2.0
    mu = 1.0 / lam
    # eigenvectors of [[a, b], [c, d]]: (b, lam - a) or (lam - d, c)
    a, b, c, d = A.ravel()

    def vec(ev):
        v = np.array([b, ev - a]) if abs(b) > 0 else np.array([ev - d, c])
        return v / np.linalg.norm(v)

    return lam, np.column_stack([vec(lam), vec(mu)])


def _suspension_anosov(A=((2, 1), (1, 1))):
    lam, P = anosov_eigen(A)
    Pinv = np.linalg.inv(P)
    deck = [{"linear": np.diag([lam, 1.0 / lam, 1.0]).tolist(), "translation": [0.0, 0.0, 1.0]}]
    for k in range(2):
        deck.append({"linear": np.eye(3).tolist(), "translation": [Pinv[0, k], Pinv[1, k], 0.0]})
    return {
        "name": "suspension_anosov",
        "chart_kind": "general",
        "dimension": 3,
        "coordinates": ["xi", "eta", "s"],
        "coefficients": {"xi,eta": "1", "s,s": "1"},
        "field": ["0", "0", "1"],
        "deck": deck,
        "fundamental_domain": {"twist": 0, "lattice": [1, 2]},
        "flags": {"claims_brinkmann": False, "claims_compact_quotient": True},
        "params": {"A": np.asarray(A, dtype=int).tolist(), "lambda": lam},
    }


CATALOG: dict[str, Entry] = {
    e.key: e
    for e in [
        Entry("minkowski", "flat 2du dv + sum dx_i^2 on R^(n+1), V = d/dv",
              (Param("n", "int", 2, "number of non-null directions; dimension n + 1"),), _minkowski),
        Entry("clifton_pohl", "Clifton-Pohl torus dx dy/(x^2+y^2) modulo (x,y) ~ 2(x,y); incomplete", (), _clifton_pohl),
        Entry("clifton_pohl_3d", "dx dy/r^2 + (dx dz + dy dz)/r modulo homothety and z-translation; d/dz null Killing",
              (), _clifton_pohl_3d),
        Entry("half_plane", "2 dx dy on {y > 0}, V = d/dx; homogeneous but incomplete", (), _half_plane),
        Entry("pp_wave", "2du(dv + H(u,z)du) + sum dz_i^2, V = d/dv",
              (Param("H", "expr", "z1^2 - z2^2", "profile H(u, z1..zn)"),
               Param("n", "int", 2, "number of transverse coordinates")), _pp_wave),
        Entry("cahen_wallach", "pp-wave with H = sum lambda_i z_i^2",
              (Param("lambdas", "float list", [-1.0, -1.0], "eigenvalues lambda_i"),), _cahen_wallach),
        Entry("rosen_torus", "2du dv + alpha_ij(u) dz^i dz^j modulo u -> u+1 and a lattice in (v, z)",
              (Param("alpha", "expr matrix", [["2 + sin(2*pi*u)", "0"], ["0", "1"]], "1-periodic positive definite alpha(u)"),
               Param("lattice", "matrix", None, "columns generate the (v, z) lattice; default identity")), _rosen_torus),
        Entry("suspension_anosov", "flat 2 dxi deta + ds^2 modulo Z^2 and the A-twist; d/ds spacelike parallel, Anosov",
              (Param("A", "int matrix", [[2, 1], [1, 1]], "hyperbolic matrix in SL(2, Z)"),), _suspension_anosov),
    ]
}


def catalog_keys():
    return list(CATALOG)


def _check_rosen(metric: MetricField, n=64):
    """alpha must be 1-periodic in u and positive definite."""
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.0, 1.0, size=(n, metric.dim))
    x2 = x.copy()
    x2[:, 0] += 1.0
    g1 = metric.matrix(x)
    g2 = metric.matrix(x2)
    if np.max(np.abs(g1 - g2)) > 1e-9 * max(1.0, float(np.max(np.abs(g1)))):
        raise CatalogError("alpha is not 1-periodic in u")
    h = g1[:, 2:, 2:]
    if np.min(np.linalg.eigvalsh(h)) <= 0:
        raise CatalogError("alpha is not positive definite")


def from_spec(spec: SpacetimeSpec, description="") -> Spacetime:
    metric = MetricField.from_spec(spec)
    V = VectorField(spec.coordinates, spec.field) if spec.field is not None else None
    st = Spacetime(
        spec=spec,
        metric=metric,
        V=V,
        deck=list(spec.deck),
        quotient=Quotient(spec.deck, spec.fundamental_domain, len(spec.coordinates)),
        flags=dict(spec.flags),
        description=description,
    )
    sig = st.base_signature()
    if not is_lorentzian(sig):
        raise CatalogError(f"{spec.name}: metric signature {sig} is not Lorentzian")
    st.extras["signature"] = sig
    if st.deck:
        iso, comp = st.deck_residuals()
        if iso > 1e-9:
            raise CatalogError(f"{spec.name}: deck transformation is not an isometry (residual {iso:.3g})")
        st.extras["deck_isometry_residual"] = iso
        st.extras["deck_inverse_residual"] = comp
    return st


def build(name: str, params: dict | None = None) -> Spacetime:
    """Construct catalog entry ``name`` with keyword ``params``."""
    if name not in CATALOG:
        raise CatalogError(f"unknown catalog key {name!r}; valid keys: {', '.join(CATALOG)}")
    entry = CATALOG[name]
    params = dict(params or {})
    allowed = {p.name for p in entry.params}
    unknown = set(params) - allowed
    if unknown:
        raise CatalogError(f"{name}: unknown parameters {sorted(unknown)}; allowed: {sorted(allowed)}")
    try:
        doc = entry.builder(**params)
    except CatalogError:
        raise
    except (TypeError, ValueError) as exc:
        raise CatalogError(f"{name}: invalid parameters: {exc}") from exc
    try:
        spec = load_spacetime_spec(doc)
    except SpecError as exc:
        raise CatalogError(f"{name}: {exc}") from exc
    if name == "rosen_torus":
        _check_rosen(MetricField.from_spec(spec))
    st = from_spec(spec, entry.description)
    if name == "suspension_anosov":
        st.extras["lambda"] = doc["params"]["lambda"]
    return st


def load(path_or_doc) -> Spacetime:
    """Build a spacetime from a JSON spec file path, JSON text or dict."""
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        text = str(path_or_doc)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        doc = json.loads(text)
    return from_spec(load_spacetime_spec(doc))
