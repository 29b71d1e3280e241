import json

import jsonschema
import numpy as np
import pytest
from conftest import DATA, SCHEMAS
from hypothesis import given
from hypothesis import strategies as st

from chanmetric import channels as ch
from chanmetric.documents import (
    RunConfig,
    channel_from_doc,
    channel_to_doc,
    decode_complex,
    encode_complex,
    load_channel,
    load_matrix,
    load_povm,
    load_vector_or_matrix,
    matrix_from_doc,
    matrix_to_doc,
    save_channel,
    to_json,
)
from chanmetric.matlin import ValidationError


def _schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


@pytest.mark.parametrize("seed", range(5))
def test_channel_round_trip_exact(tmp_path, seed):
    rng = np.random.default_rng(seed)
    k = ch.random_channel(2 + seed % 2, num_kraus=1 + seed % 3, rng=rng)
    path = tmp_path / "c.json"
    save_channel(k, path)
    back = load_channel(path)
    assert np.array_equal(back.kraus, k.kraus)
    assert np.array_equal(ch.choi(back), ch.choi(k))


@given(st.floats(allow_nan=False, allow_infinity=False, width=64), st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip_bit_exact(re, im):
    m = np.array([[complex(re, im)]])
    back = decode_complex(json.loads(to_json(encode_complex(m))), 2)
    assert back[0, 0].real == re and back[0, 0].imag == im


def test_seventeen_significant_digits_survive():
    x = 0.12345678901234567
    assert json.loads(to_json({"x": x}))["x"] == x


def test_data_documents_validate_against_schema():
    channel, matrix = _schema("channel"), _schema("matrix")
    for path in sorted(DATA.glob("*.json")):
        doc = json.loads(path.read_text())
        jsonschema.validate(doc, channel if "kraus" in doc else matrix)


def test_data_documents_load():
    assert load_channel(DATA / "deph05.json").num_kraus == 2
    assert np.allclose(load_matrix(DATA / "eye2.json"), np.eye(2))
    assert len(load_povm(DATA / "ramsey_povm.json")) == 2
    assert load_vector_or_matrix(DATA / "plus.json").shape == (2,)


def test_single_kraus_channel_doubles_as_matrix():
    u = ch.rotation_x(0.3)
    assert np.array_equal(matrix_from_doc(channel_to_doc(u)), u.kraus[0])
    with pytest.raises(ValidationError):
        matrix_from_doc(channel_to_doc(ch.dephasing(0.5)))


def test_plain_reals_accepted():
    doc = {"format_version": 1, "matrix": [[1, 0], [0, 1]]}
    assert np.array_equal(matrix_from_doc(doc), np.eye(2))


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"matrix": [[1]]},
        {"format_version": 2, "matrix": [[1]]},
        {"format_version": 1},
        {"format_version": 1, "matrix": []},
        {"format_version": 1, "matrix": [[1, 0], [0]]},
        {"format_version": 1, "matrix": [[True]]},
        {"format_version": 1, "matrix": [["1"]]},
        {"format_version": 1, "matrix": [[[1, 2, 3]]]},
    ],
)
def test_bad_matrix_documents(doc):
    with pytest.raises(ValidationError):
        matrix_from_doc(doc)


def test_bad_channel_documents():
    good = channel_to_doc(ch.dephasing(0.5))
    with pytest.raises(ValidationError, match="lacks"):
        channel_from_doc({k: v for k, v in good.items() if k != "dim_in"})
    with pytest.raises(ValidationError, match="shape"):
        channel_from_doc({**good, "dim_out": 3})
    not_tp = {**good, "kraus": good["kraus"][:1]}
    with pytest.raises(ValidationError):
        channel_from_doc(not_tp)


def test_unreadable_files(tmp_path):
    with pytest.raises(ValidationError, match="cannot read"):
        load_channel(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_channel(bad)


def test_to_json_deterministic_and_finite():
    doc = {"b": np.float64(1.5), "a": [np.int64(3), np.bool_(True)], "c": float("inf"), "d": np.eye(2)}
    s = to_json(doc)
    assert s == to_json(dict(reversed(list(doc.items()))))
    back = json.loads(s)
    assert back == {"a": [3, True], "b": 1.5, "c": "inf", "d": [[1.0, 0.0], [0.0, 1.0]]}
    assert matrix_to_doc(np.eye(1))["matrix"] == [[[1.0, 0.0]]]


def test_run_config_defaults_and_names():
    c = RunConfig()
    assert c.as_dict() == {
        "sdp_tol": 1e-9,
        "ortho_threshold": 1e-7,
        "fd_step": 1e-3,
        "grid": 41,
        "max_n": 8,
        "seed": 42,
        "output": "text",
    }
    assert RunConfig.field_names() == list(c.as_dict())


@pytest.mark.parametrize(
    "kw",
    [
        {"sdp_tol": 0.0},
        {"sdp_tol": 1e-2},
        {"ortho_threshold": 0.0},
        {"fd_step": 1.0},
        {"grid": 3},
        {"max_n": 0},
        {"max_n": 17},
        {"seed": -1},
        {"output": "yaml"},
    ],
)
def test_run_config_rejects(kw):
    with pytest.raises(ValidationError):
        RunConfig(**kw)
