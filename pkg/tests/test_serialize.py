import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cyclic_inference import caliber, kernelprop, serialize
from cyclic_inference.factors import FactorChain, FactorCycle


def test_real_matrix_round_trip():
    m = np.array([[1.0, 2.5], [-3.0, 4.0]])
    assert_allclose(serialize.load_matrix(serialize.dump_matrix(m)), m, atol=0)


def test_complex_matrix_round_trip():
    m = np.array([[1.0, 2j], [-1j, 0.5 + 0.5j]])
    dumped = serialize.dump_matrix(m)
    assert dumped[0][1] == [0.0, 2.0]
    assert_allclose(serialize.load_matrix(dumped), m, atol=0)


def test_matrix_depth_decides_realness():
    # depth 2 -> real 2x2; depth 3 -> complex 1x2
    assert serialize.load_matrix([[1, 2], [3, 4]]).dtype == np.float64
    c = serialize.load_matrix([[[1, 2], [3, 4]]])
    assert c.shape == (1, 2) and c[0, 0] == 1 + 2j


def test_matrix_rejects_garbage():
    with pytest.raises(ValueError):
        serialize.load_matrix([[1, 2], [3]])
    with pytest.raises(ValueError):
        serialize.load_matrix([1, 2, 3])
    with pytest.raises(ValueError):
        serialize.load_matrix([[["a", "b"]]])
    with pytest.raises(ValueError):
        serialize.dump_matrix([1.0, 2.0])


def test_vector_loading():
    assert_allclose(serialize.load_vector([1, 2.5]), [1.0, 2.5], atol=0)
    with pytest.raises(ValueError):
        serialize.load_vector([[1, 2]])


def test_grid_spec():
    g = serialize.load_grid({"delta": 0.5, "n": 8, "origin": -2.0})
    assert g == kernelprop.Grid1D(delta=0.5, n=8, origin=-2.0)
    assert serialize.load_grid({"delta": 1.0, "n": 4}).origin == 0.0
    with pytest.raises(ValueError):
        serialize.load_grid({"n": 4})


def test_potential_kinds():
    zero = serialize.load_potential({"kind": "zero"})
    assert_allclose(zero(np.array([1.0, 2.0])), 0.0, atol=0)
    const = serialize.load_potential({"kind": "constant", "value": 4.0})
    assert_allclose(const(np.array([0.0, 9.0])), 4.0, atol=0)
    harm = serialize.load_potential({"kind": "harmonic", "k": 2.0, "center": 1.0})
    assert_allclose(harm(np.array([0.0, 3.0])), [1.0, 4.0], atol=0)
    with pytest.raises(ValueError):
        serialize.load_potential({"kind": "mystery"})


def test_table_potential_interpolates_periodically():
    g = kernelprop.Grid1D(delta=1.0, n=4, origin=0.0)
    v = serialize.load_potential({"kind": "table", "values": [0.0, 1.0, 2.0, 1.0]}, g)
    assert_allclose(v(g.points), [0.0, 1.0, 2.0, 1.0], atol=0)
    assert_allclose(v(0.5), 0.5, atol=1e-15)        # midpoint sampling
    assert_allclose(v(3.5), 0.5, atol=1e-15)        # wraps toward values[0]
    assert_allclose(v(-0.5), 0.5, atol=1e-15)       # same point, negative side
    with pytest.raises(ValueError):
        serialize.load_potential({"kind": "table", "values": [1.0]}, g)
    with pytest.raises(ValueError):
        serialize.load_potential({"kind": "table", "values": [1.0] * 4})


def test_caliber_spec():
    spec = serialize.load_caliber(
        {"hamiltonian": [[0.0, 1.0], [1.0, 0.0]], "lam": 2.0, "epsilon": 0.1, "n": 3}
    )
    assert isinstance(spec, caliber.CaliberSpec)
    assert spec.lam == 2.0 and spec.mass is None
    with pytest.raises(ValueError):
        serialize.load_caliber({"lam": 1.0, "epsilon": 0.1, "n": 2})


def test_chain_spec_inline_factors():
    chain = serialize.load_chain(
        {
            "factors": [[[1.0, 0.5], [0.5, 1.0]]],
            "sites": 2,
            "boundary_left": [1.0, 0.0],
            "weight": 2.0,
        }
    )
    assert isinstance(chain, FactorChain)
    assert chain.weight == 2.0
    assert_allclose(chain.boundary_left, [1.0, 0.0], atol=0)
    with pytest.raises(ValueError):
        serialize.load_chain({"factors": [[[1.0, 0.5], [0.5, 1.0]]], "sites": 5})
    with pytest.raises(ValueError):
        serialize.load_chain({"factors": [[[[1.0, 0.0]]]]})  # complex table


def test_chain_spec_from_caliber():
    chain = serialize.load_chain(
        {
            "caliber": {"hamiltonian": [[0.0, 1.0], [1.0, 0.0]],
                        "lam": 1.0, "epsilon": 0.5, "n": 2},
            "states": [0.0, 1.0],
        }
    )
    assert isinstance(chain, FactorChain) and len(chain.factors) == 2
    with pytest.raises(ValueError):
        serialize.load_chain(
            {"caliber": {"hamiltonian": [[0.0]], "lam": 1.0, "epsilon": 0.5, "n": 2}}
        )


def test_cycle_spec():
    eye = [[1.0, 0.0], [0.0, 1.0]]
    cyc = serialize.load_cycle(
        {"n": 2, "q": 2, "factors": [eye, eye], "roles": ["ext", "plain"]}
    )
    assert isinstance(cyc, FactorCycle) and cyc.roles == ("ext", "plain")
    with pytest.raises(ValueError):
        serialize.load_cycle({"n": 3, "factors": [eye, eye]})
    with pytest.raises(ValueError):
        serialize.load_cycle({"q": 3, "factors": [eye, eye]})


def test_csv_formatting_and_determinism(tmp_path):
    path = tmp_path / "table.csv"
    serialize.write_table(path, ["idx", "value", "label"],
                          [(1, 1.0, "a"), (np.int64(2), np.float64(0.5), "b")])
    text = path.read_text()
    assert text.splitlines() == [
        "idx,value,label",
        "1,1.0000000000000000e+00,a",
        "2,5.0000000000000000e-01,b",
    ]
    # rewriting produces identical bytes
    before = path.read_bytes()
    serialize.write_table(path, ["idx", "value", "label"],
                          [(1, 1.0, "a"), (2, 0.5, "b")])
    assert path.read_bytes() == before
    with pytest.raises(ValueError):
        serialize.write_table(path, ["a", "b"], [(1,)])


def test_report_writer_sorts_and_coerces(tmp_path):
    path = tmp_path / "report.json"
    serialize.write_report(path, {"b": np.float64(1.5), "a": np.int64(2),
                                  "c": np.arange(2)})
    data = json.loads(path.read_text())
    assert data == {"a": 2, "b": 1.5, "c": [0, 1]}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')
    assert path.read_text().endswith("\n")


def test_read_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ValueError):
        serialize.read_json(bad)
    with pytest.raises(ValueError):
        serialize.read_json(tmp_path / "missing.json")
