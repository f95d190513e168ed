import json

import numpy as np
import pytest

from brinkmann.catalog import load
from brinkmann.errors import SpecError
from brinkmann.geometry import MetricField
from brinkmann.spec import load_spacetime_spec


def minkowski_doc(**over):
    doc = {
        "name": "mink3",
        "chart_kind": "brinkmann",
        "dimension": 3,
        "coordinates": ["u", "v", "x1"],
        "coefficients": {},
    }
    doc.update(over)
    return doc


def test_minkowski_document():
    spec = load_spacetime_spec(minkowski_doc())
    m = MetricField.from_spec(spec)
    assert not m._varying
    assert np.array_equal(m.matrix([0.3, 2.0, -1.0]), [[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    assert spec.field is not None


def test_rosen_exp_coefficient():
    doc = minkowski_doc(chart_kind="rosen", coefficients={"g_11": "exp(2*u)"})
    m = MetricField.from_spec(load_spacetime_spec(doc))
    assert m.matrix([0.0, 0.0, 0.0])[2, 2] == 1.0
    assert m.matrix([1.0, 0.0, 0.0])[2, 2] == pytest.approx(np.exp(2))


def test_rosen_rejects_H():
    with pytest.raises(SpecError) as info:
        load_spacetime_spec(minkowski_doc(chart_kind="rosen", coefficients={"H": "x1^2"}))
    assert "H" in str(info.value)
    assert info.value.path == "coefficients.H"


def test_json_text_accepted():
    spec = load_spacetime_spec(json.dumps(minkowski_doc()))
    assert spec.name == "mink3"


@pytest.mark.parametrize(
    "over, path",
    [
        ({"dimension": 4}, "coordinates"),
        ({"chart_kind": "lorentz"}, "chart_kind"),
        ({"coordinates": ["u", "v", "v"]}, "coordinates"),
        ({"coefficients": {"H": "x1 +"}}, "coefficients.H"),
        ({"coefficients": {"H": "y"}}, "coefficients.H"),
        ({"coefficients": {"g_33": "1"}}, "coefficients.g_33"),
        ({"coefficients": {"H": "v"}}, "coefficients"),
        ({"deck": [{"linear": [[1, 0, 0], [0, 0, 0], [0, 0, 1]], "translation": [0, 0, 0]}]}, "deck[0].linear"),
        ({"deck": [{"linear": [[1, 0], [0, 1]], "translation": [0, 0, 0]}]}, "deck[0].linear"),
        ({"field": ["0", "1"]}, "field"),
        ({"flags": {"claims_compact": True}}, "flags"),
        ({"sample_box": [[0, 1], [1, 0], [0, 1]]}, "sample_box"),
    ],
)
def test_schema_violations(over, path):
    with pytest.raises(SpecError) as info:
        load_spacetime_spec(minkowski_doc(**over))
    assert info.value.path == path


def test_missing_field():
    doc = minkowski_doc()
    del doc["coefficients"]
    with pytest.raises(SpecError) as info:
        load_spacetime_spec(doc)
    assert info.value.path == "coefficients"


def test_unknown_top_key():
    with pytest.raises(SpecError, match="unknown keys"):
        load_spacetime_spec(minkowski_doc(extra=1))


def test_invalid_json():
    with pytest.raises(SpecError, match="invalid JSON"):
        load_spacetime_spec("{not json")


def test_general_chart_keys():
    doc = {
        "name": "cp",
        "chart_kind": "general",
        "dimension": 2,
        "coordinates": ["x", "y"],
        "coefficients": {"x,y": "1/(2*(x^2+y^2))"},
        "domain": ["x^2 + y^2"],
    }
    spec = load_spacetime_spec(doc)
    assert spec.field is None
    assert set(spec.entries) == {(0, 1)}


def test_fundamental_domain_checks():
    deck = [{"linear": [[2, 0, 0], [0, 1, 0], [0, 0, 1]], "translation": [0, 0, 0]}]
    with pytest.raises(SpecError) as info:
        load_spacetime_spec(minkowski_doc(deck=deck, fundamental_domain={"lattice": [0]}))
    assert info.value.path == "fundamental_domain.lattice"
    with pytest.raises(SpecError):
        load_spacetime_spec(minkowski_doc(deck=deck, fundamental_domain={"twist": 3}))


def test_round_trip_document(tmp_path):
    doc = minkowski_doc(
        chart_kind="rosen",
        coefficients={"g_11": "2 + sin(2*pi*u)"},
        deck=[{"linear": np.eye(3).tolist(), "translation": [0, 1, 0]}],
        fundamental_domain={"lattice": [0]},
    )
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    st = load(str(path))
    again = load(st.spec.to_document())
    x = st.sample_points(10)
    assert np.array_equal(st.metric.matrix(x), again.metric.matrix(x))
