import json
from importlib import resources

import numpy as np
import pytest

from coherence_wb import convertibility as cv
from coherence_wb import jsonio as io
from coherence_wb import process as pr
from coherence_wb.errors import InputError

from conftest import H, PLUS, MINUS

FIXTURES = resources.files("coherence_wb") / "fixtures"


def fixture(name):
    return str(FIXTURES / name)


def test_matrix_round_trip_is_bit_exact(rng):
    m = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    m[0, 0] = 1 / 3
    back = io.decode_matrix(json.loads(json.dumps(io.encode_matrix(m))))
    assert np.array_equal(back, m)


def test_matrix_from_nested_list():
    assert np.array_equal(io.decode_matrix([[1, 2], [3, 4]]), np.array([[1, 2], [3, 4]], dtype=complex))


@pytest.mark.parametrize("bad", [{"rows": 2, "cols": 2, "data": [[1, 0]]}, {"rows": 1}, [1, 2], "x",
                                 {"rows": 1, "cols": 1, "data": [["a", 0]]}])
def test_bad_matrices(bad):
    with pytest.raises(InputError):
        io.decode_matrix(bad)


def test_load_theories():
    t = io.load_theory(fixture("theory_qubit_dephasing.json"))
    assert set(t.systems) == {"q", "r"}
    fam = t.family()
    q = t.label("q")
    assert np.allclose(fam.dec(q).choi, np.diag([1, 0, 0, 1]))
    g = io.load_theory(fixture("theory_z2_global.json"))
    assert g.rule == "global" and g.representation().order == 2
    m = io.load_theory(fixture("theory_z2_mechanism.json"))
    assert m.free_set("mech").kind == "MechanismInvariant"


def test_malformed_theory():
    with pytest.raises(InputError):
        io.load_theory(fixture("theory_malformed.json"))
    with pytest.raises(InputError):
        io.load_theory(fixture("does_not_exist.json"))


def test_undeclared_system():
    with pytest.raises(InputError):
        io.parse_theory({"systems": [{"name": "q", "dim": 2}],
                         "decoherence": [{"system": ["zz"], "type": "dephasing"}]})


def test_process_formats():
    t = io.load_theory(fixture("theory_qubit_dephasing.json"))
    h = io.load_process(fixture("channel_h.json"), t)
    q = t.label("q")
    assert np.allclose(h.choi, pr.unitary_channel(H, q).choi)
    k = io.decode_process({"input": ["q"], "kraus": [np.eye(2).tolist()]}, t.systems)
    assert np.allclose(k.choi, pr.identity(q).choi)
    back = io.decode_process(json.loads(io.dump_json(io.encode_process(h))), t.systems)
    assert np.array_equal(back.choi, h.choi)
    with pytest.raises(InputError):
        io.decode_process({"input": ["q"]}, t.systems)


def test_resource_round_trip():
    t = io.load_theory(fixture("theory_qubit_dephasing.json"))
    q = t.label("q")
    rs = [cv.Resource.state(PLUS, q, "p"), cv.Resource.effect(np.diag([1, 0.5]), q, "e"),
          cv.Resource.measurement([PLUS, MINUS], q, "m"), cv.Resource.process(pr.unitary_channel(H, q), "h")]
    for r in rs:
        back = io.decode_resource(json.loads(io.dump_json(io.encode_resource(r))), t)
        assert back.variant == r.variant and back.label == r.label
        assert io.encode_resource(back) == io.encode_resource(r)


def test_result_round_trip_for_every_certificate_kind():
    t = io.load_theory(fixture("theory_qubit_dephasing.json"))
    q = t.label("q")
    spec = t.free_set("dio")
    h = pr.unitary_channel(H, q)
    x = pr.unitary_channel(np.array([[0, 1], [1, 0]]), q)
    queries = [(cv.Resource.state(PLUS, q), cv.Resource.state(np.eye(2) / 2, q)),
               (cv.Resource.measurement([PLUS, MINUS], q), cv.Resource.measurement([np.eye(2)], q)),
               (cv.Resource.process(h), cv.Resource.process(x))]
    for src, tgt in queries:
        query = cv.ConversionQuery(src, tgt, spec)
        res = cv.can_convert(query)
        assert res.feasible
        enc = io.encode_result(res)
        back = io.decode_result(json.loads(io.dump_json(enc)), t.systems)
        assert io.encode_result(back) == enc
        assert cv.verify_certificate(back, query)


def test_write_atomic(tmp_path):
    p = tmp_path / "out.json"
    io.write_atomic(str(p), "{}\n")
    assert p.read_text() == "{}\n"
    assert [f.name for f in tmp_path.iterdir()] == ["out.json"]
