import io as stdio
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idealcp import io
from idealcp.cliques import maximal_cliques
from idealcp.errors import ParseError
from idealcp.tensor import Atom, Decomposition, from_decomposition, l1_distance, random_cp


def test_tensor_text_roundtrip(ex1):
    text = io.format_tensor(ex1)
    assert text.splitlines()[0] == "3 3"
    assert io.parse_tensor(text) == ex1


def test_tensor_dict_roundtrip(ex1):
    assert io.tensor_from_dict(json.loads(json.dumps(io.tensor_to_dict(ex1)))) == ex1


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(2, 4), st.integers(0, 10 ** 6))
def test_tensor_roundtrip_is_exact(n, m, seed):
    a, _ = random_cp(n, m, 2, n, seed=seed)
    back = io.parse_tensor(io.format_tensor(a))
    assert dict(back.items()) == dict(a.items())


def test_unsorted_indices_and_comments():
    a = io.parse_tensor("# header next\n3 2\n2 1 1 0.5  # permuted\n\n2 2 2 1\n")
    assert a[(1, 1, 2)] == 0.5 and a[(2, 2, 2)] == 1.0


@pytest.mark.parametrize("text, line, fragment", [
    ("", 1, "missing header"),
    ("3\n", 1, "header"),
    ("3 x\n", 1, "integers"),
    ("1 3\n", 1, "m >= 2"),
    ("3 2\n1 1 1\n", 2, "expected 3 indices"),
    ("3 2\n1 1 a 1.0\n", 2, "cannot parse"),
    ("3 2\n1 1 3 1.0\n", 2, "out of range"),
    ("3 2\n1 1 1 nan\n", 2, "non-finite"),
    ("3 2\n1 1 2 1\n# note\n2 1 1 2\n", 4, "duplicate"),
])
def test_tensor_parse_errors(text, line, fragment):
    with pytest.raises(ParseError) as exc:
        io.parse_tensor(text)
    assert exc.value.lineno == line
    assert str(exc.value).startswith(f"line {line}:")
    assert fragment in str(exc.value)


def test_load_and_save(tmp_path, ex1):
    for fmt in ("text", "json"):
        p = tmp_path / f"a.{fmt}"
        io.save_tensor(ex1, p, fmt)
        assert io.load_tensor(p) == ex1
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ParseError):
        io.load_tensor(bad)


def test_decomposition_roundtrip():
    d = Decomposition(3, 3, [Atom(2.0, np.array([0.6, 0.8, 0.0]), (1, 2)),
                             Atom(0.5, np.array([0.0, 0.0, 1.0]), (3,))])
    text = io.format_decomposition(d, 1.5e-9)
    assert "# l1 reconstruction error: 1.500e-09" in text
    back = io.parse_decomposition(text)
    np.testing.assert_array_equal(back.weights, d.weights)
    np.testing.assert_array_equal(back.vectors, d.vectors)
    assert [a.clique for a in back.atoms] == [(1, 2), (3,)]
    # the absorbed form describes the same tensor
    absorbed = io.parse_decomposition(io.format_decomposition(d, absorbed=True))
    assert l1_distance(from_decomposition(absorbed), from_decomposition(d)) < 1e-12
    back = io.decomposition_from_dict(json.loads(json.dumps(io.decomposition_to_dict(d))))
    np.testing.assert_array_equal(back.vectors, d.vectors)


def test_decomposition_parse_errors():
    with pytest.raises(ParseError):
        io.parse_decomposition("3 2 2\n1 1 0\n")
    with pytest.raises(ParseError):
        io.parse_decomposition("3 2 1\n1 1\n")
    with pytest.raises(ParseError):
        io.parse_decomposition("")


def test_clique_roundtrip(ex1):
    c = maximal_cliques(ex1)
    text = io.format_cliques(c)
    assert io.parse_cliques(text, 3).cliques == c.cliques
    assert io.cliques_from_dict(io.cliques_to_dict(c)).cliques == c.cliques
    with pytest.raises(ParseError):
        io.parse_cliques("1 2 3\n", 3)
