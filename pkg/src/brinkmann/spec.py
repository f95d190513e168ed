"""Spacetime specification documents (the JSON ingestion format).

A document looks like::

    {
      "name": "rosen-example",
      "chart_kind": "rosen",                 # brinkmann | rosen | general
      "dimension": 4,
      "coordinates": ["u", "v", "z1", "z2"],
      "coefficients": {"g_11": "2 + sin(2*pi*u)"},
      "field": ["0", "1", "0", "0"],         # optional, null for none
      "deck": [{"linear": [[...]], "translation": [...]}],
      "fundamental_domain": {"homothety": null, "twist": 0, "lattice": [1, 2, 3]},
      "domain": [],                          # expressions that must stay > 0
      "sample_box": [[0, 1], ...],           # optional sampling box per coordinate
      "flags": {"claims_brinkmann": true, "claims_compact_quotient": true}
    }

Coefficient keys depend on the chart kind.  For ``general`` charts they are
coordinate-name pairs ``"x,y"`` giving the matrix entry g_xy.  Brinkmann and
Rosen charts put u and v first and fix g_uv = 1, g_vv = g_va = 0; the keys
are ``g_ij`` (or ``g_i_j``) for the transverse block with 1-based indices,
defaulting to the identity, and in Brinkmann charts also ``H`` (the du^2
coefficient) and ``W_i`` (the du dx^i coefficient, so g_ui = W_i / 2).
"""

from __future__ import annotations

import json
import re
import dataclasses
from dataclasses import dataclass
from typing import Any

import numpy as np

from .dsl import Expr, parse_expr, to_string, variables
from .errors import BrinkmannError, SpecError

CHART_KINDS = ("brinkmann", "rosen", "general")
_TOP_KEYS = {
    "name",
    "chart_kind",
    "dimension",
    "coordinates",
    "coefficients",
    "field",
    "deck",
    "fundamental_domain",
    "domain",
    "sample_box",
    "flags",
    "params",
}
_FLAG_KEYS = ("claims_brinkmann", "claims_compact_quotient")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


@dataclass(frozen=True)
class DeckTransform:
    """Affine deck map x -> linear @ x + translation; its derivative is ``linear``."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @property
    def derivative(self) -> np.ndarray:
        return self.linear

    def __call__(self, x):
        return np.asarray(x) @ self.linear.T + self.translation

    def push(self, v):
        return np.asarray(v) @ self.linear.T

    def inverse(self) -> "DeckTransform":
        inv = np.linalg.inv(self.linear)
        return DeckTransform(inv, -inv @ self.translation)

    def to_json(self):
        return {"linear": self.linear.tolist(), "translation": self.translation.tolist()}


@dataclass
class SpacetimeSpec:
    name: str
    chart_kind: str
    coordinates: tuple[str, ...]
    entries: dict[tuple[int, int], Expr]  # a <= b, nonconstant-or-constant metric entries
    coefficients: dict[str, str]
    field: tuple[Expr, ...] | None = None
    deck: list[DeckTransform] = dataclasses.field(default_factory=list)
    fundamental_domain: dict[str, Any] = dataclasses.field(default_factory=dict)
    domain: list[Expr] = dataclasses.field(default_factory=list)
    sample_box: np.ndarray | None = None
    flags: dict[str, bool] = dataclasses.field(default_factory=dict)
    params: dict[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def to_document(self) -> dict:
        """The JSON document this spec was (or could have been) loaded from."""
        return {
            "name": self.name,
            "chart_kind": self.chart_kind,
            "dimension": self.dimension,
            "coordinates": list(self.coordinates),
            "coefficients": dict(self.coefficients),
            "field": None if self.field is None else [to_string(e) for e in self.field],
            "deck": [d.to_json() for d in self.deck],
            "fundamental_domain": dict(self.fundamental_domain),
            "domain": [to_string(e) for e in self.domain],
            "sample_box": None if self.sample_box is None else self.sample_box.tolist(),
            "flags": dict(self.flags),
            "params": dict(self.params),
        }


def _parse(text, coords, path):
    if not isinstance(text, (str, int, float)) or isinstance(text, bool):
        raise SpecError("expression must be a string", path)
    try:
        return parse_expr(str(text), coords)
    except BrinkmannError as exc:
        raise SpecError(str(exc), path) from exc


def _matrix(obj, shape, path):
    try:
        m = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError("expected a numeric array", path) from exc
    if m.shape != shape:
        raise SpecError(f"expected shape {shape}, got {m.shape}", path)
    if not np.all(np.isfinite(m)):
        raise SpecError("non-finite entry", path)
    return m


_TRANSVERSE = re.compile(r"^g_(\d)(\d)$|^g_(\d+)_(\d+)$")
_W_KEY = re.compile(r"^W_?(\d+)$")


def _transverse_index(key):
    m = _TRANSVERSE.match(key)
    if not m:
        return None
    i, j = (m.group(1), m.group(2)) if m.group(1) else (m.group(3), m.group(4))
    return int(i), int(j)


def _entries(kind, coords, coefficients):
    d = len(coords)
    exprs: dict[tuple[int, int], Expr] = {}
    path = "coefficients"

    def put(a, b, e, key):
        a, b = min(a, b), max(a, b)
        if (a, b) in exprs:
            raise SpecError(f"entry ({coords[a]},{coords[b]}) given twice", f"{path}.{key}")
        exprs[(a, b)] = e

    if kind == "general":
        for key, text in coefficients.items():
            names = [s.strip() for s in key.split(",")]
            if len(names) != 2 or any(n not in coords for n in names):
                raise SpecError(f"general-chart key {key!r} must be 'a,b' with declared coordinates", f"{path}.{key}")
            put(coords.index(names[0]), coords.index(names[1]), _parse(text, coords, f"{path}.{key}"), key)
        return exprs

    one = parse_expr("1", coords)
    zero = parse_expr("0", coords)
    exprs[(0, 1)] = one
    exprs[(1, 1)] = zero
    for k in range(2, d):
        exprs[(1, k)] = zero
    transverse = {}
    for key, text in coefficients.items():
        kpath = f"{path}.{key}"
        if key == "H" or _W_KEY.match(key):
            if kind == "rosen":
                raise SpecError(f"Rosen charts have no {key!r} term", kpath)
            e = _parse(text, coords, kpath)
            if key == "H":
                exprs[(0, 0)] = e
            else:
                i = int(_W_KEY.match(key).group(1))
                if not 1 <= i <= d - 2:
                    raise SpecError(f"transverse index {i} out of range 1..{d - 2}", kpath)
                exprs[(0, i + 1)] = parse_expr(f"({to_string(e)}) / 2", coords)
            continue
        ij = _transverse_index(key)
        if ij is None:
            raise SpecError(f"unknown coefficient key {key!r} for a {kind} chart", kpath)
        i, j = ij
        if not (1 <= i <= d - 2 and 1 <= j <= d - 2):
            raise SpecError(f"transverse index out of range 1..{d - 2}", kpath)
        a, b = min(i, j) + 1, max(i, j) + 1
        if (a, b) in transverse:
            raise SpecError(f"transverse entry g_{i}{j} given twice", kpath)
        transverse[(a, b)] = _parse(text, coords, kpath)
    for a in range(2, d):
        for b in range(a, d):
            exprs[(a, b)] = transverse.get((a, b), one if a == b else zero)
    exprs.setdefault((0, 0), zero)
    for k in range(2, d):
        exprs.setdefault((0, k), zero)
    v = coords[1]
    for (a, b), e in exprs.items():
        if v in variables(e):
            raise SpecError(f"coefficient ({coords[a]},{coords[b]}) depends on {v!r}", path)
    return exprs


def _fundamental_domain(fd, deck, d, path="fundamental_domain"):
    if fd is None:
        fd = {}
    if not isinstance(fd, dict):
        raise SpecError("expected an object", path)
    unknown = set(fd) - {"homothety", "twist", "lattice"}
    if unknown:
        raise SpecError(f"unknown keys {sorted(unknown)}", path)
    out = {"homothety": fd.get("homothety"), "twist": fd.get("twist"), "lattice": list(fd.get("lattice") or [])}
    n = len(deck)
    for key in ("homothety", "twist"):
        idx = out[key]
        if idx is not None and (not isinstance(idx, int) or not 0 <= idx < n):
            raise SpecError(f"deck index {idx!r} out of range", f"{path}.{key}")
    for idx in out["lattice"]:
        if not isinstance(idx, int) or not 0 <= idx < n:
            raise SpecError(f"deck index {idx!r} out of range", f"{path}.lattice")
        if not np.allclose(deck[idx].linear, np.eye(d), atol=0, rtol=0):
            raise SpecError(f"lattice generator {idx} is not a pure translation", f"{path}.lattice")
    h = out["homothety"]
    if h is not None:
        g = deck[h]
        diag = np.diag(g.linear)
        if not np.array_equal(g.linear, np.diag(diag)) or np.any(g.translation != 0):
            raise SpecError("homothety generator must be diagonal without translation", f"{path}.homothety")
        scaled = diag != 1.0
        if not scaled.any() or len(set(diag[scaled])) != 1 or diag[scaled][0] <= 1.0:
            raise SpecError("homothety must scale a coordinate subset by one factor > 1", f"{path}.homothety")
    t = out["twist"]
    if t is not None:
        g = deck[t]
        nz = np.flatnonzero(g.translation)
        if len(nz) != 1 or g.translation[nz[0]] <= 0:
            raise SpecError("twist translation must move exactly one coordinate forward", f"{path}.twist")
        c = nz[0]
        e = np.zeros(d)
        e[c] = 1.0
        if not (np.array_equal(g.linear[:, c], e) and np.array_equal(g.linear[c, :], e)):
            raise SpecError("twist linear part must fix its period coordinate", f"{path}.twist")
    return out


def load_spacetime_spec(document) -> SpacetimeSpec:
    """Validate and compile a spacetime document (dict, JSON text, or path-like JSON)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SpecError("document must be a JSON object")
    unknown = set(document) - _TOP_KEYS
    if unknown:
        raise SpecError(f"unknown keys {sorted(unknown)}")
    for key in ("name", "chart_kind", "dimension", "coordinates", "coefficients"):
        if key not in document:
            raise SpecError("missing required field", key)

    name = document["name"]
    if not isinstance(name, str) or not name:
        raise SpecError("must be a nonempty string", "name")
    kind = document["chart_kind"]
    if kind not in CHART_KINDS:
        raise SpecError(f"must be one of {CHART_KINDS}", "chart_kind")
    dim = document["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
        raise SpecError("must be an integer >= 2", "dimension")
    coords = document["coordinates"]
    if not isinstance(coords, list) or len(coords) != dim:
        raise SpecError(f"must list exactly {dim} names", "coordinates")
    if len(set(coords)) != dim or not all(isinstance(c, str) and _IDENT.match(c) for c in coords):
        raise SpecError("names must be distinct identifiers", "coordinates")
    coords = tuple(coords)
    try:
        parse_expr("0", coords)
    except ValueError as exc:
        raise SpecError(str(exc), "coordinates") from exc
    if kind != "general" and dim < 3:
        raise SpecError("Brinkmann and Rosen charts need dimension >= 3", "dimension")
    coefficients = document["coefficients"]
    if not isinstance(coefficients, dict):
        raise SpecError("must be an object", "coefficients")
    coefficients = {str(k): str(v) for k, v in coefficients.items()}
    entries = _entries(kind, list(coords), coefficients)

    fld = document.get("field", "default")
    if fld == "default":
        fld = None if kind == "general" else ["0", "1"] + ["0"] * (dim - 2)
    if fld is not None:
        if not isinstance(fld, list) or len(fld) != dim:
            raise SpecError(f"must list {dim} component expressions", "field")
        fld = tuple(_parse(t, coords, f"field[{i}]") for i, t in enumerate(fld))

    deck = []
    for i, g in enumerate(document.get("deck") or []):
        gpath = f"deck[{i}]"
        if not isinstance(g, dict) or set(g) != {"linear", "translation"}:
            raise SpecError("expected {linear, translation}", gpath)
        lin = _matrix(g["linear"], (dim, dim), f"{gpath}.linear")
        tr = _matrix(g["translation"], (dim,), f"{gpath}.translation")
        if abs(np.linalg.det(lin)) < 1e-12:
            raise SpecError("non-invertible deck matrix", f"{gpath}.linear")
        deck.append(DeckTransform(lin, tr))

    fd = _fundamental_domain(document.get("fundamental_domain"), deck, dim)
    domain = [_parse(t, coords, f"domain[{i}]") for i, t in enumerate(document.get("domain") or [])]

    box = document.get("sample_box")
    if box is not None:
        box = _matrix(box, (dim, 2), "sample_box")
        if np.any(box[:, 1] <= box[:, 0]):
            raise SpecError("each row must be [lo, hi] with lo < hi", "sample_box")

    flags = document.get("flags") or {}
    if not isinstance(flags, dict) or set(flags) - set(_FLAG_KEYS):
        raise SpecError(f"allowed flags are {_FLAG_KEYS}", "flags")
    flags = {k: bool(flags.get(k, False)) for k in _FLAG_KEYS}
    if flags["claims_brinkmann"] and fld is None:
        raise SpecError("claims_brinkmann requires a distinguished field", "flags")

    return SpacetimeSpec(
        name=name,
        chart_kind=kind,
        coordinates=coords,
        entries=entries,
        coefficients=coefficients,
        field=fld,
        deck=deck,
        fundamental_domain=fd,
        domain=domain,
        sample_box=box,
        flags=flags,
        params=dict(document.get("params") or {}),
    )
