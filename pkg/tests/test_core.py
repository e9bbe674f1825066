import json

import numpy as np
import pytest
from hypothesis import given

from conftest import designs
from grouptest.core import (DesignError, DesignFormatError, PoolDesign, as_assignment,
                            degree_profile, design_from_dict, four_cycle_census,
                            four_cycle_counts, girth_at_least_6, load_design, save_design)


def test_views_agree(path_design):
    d = path_design
    assert (d.n_variables, d.n_tests, d.n_edges) == (3, 2, 4)
    assert d.tests == ((0, 1), (1, 2))
    assert list(d.tests_of(1)) == [0, 1]
    assert list(d.tests_of(0)) == [0]
    var_deg, test_deg = degree_profile(d)
    assert var_deg.tolist() == [1, 2, 1]
    assert test_deg.tolist() == [2, 2]


def test_arrays_are_read_only(path_design):
    for arr in path_design.arrays():
        with pytest.raises(ValueError):
            arr[0] = 7


def test_pools_get_sorted():
    assert PoolDesign(4, [[3, 0, 2]]).tests == ((0, 2, 3),)


@pytest.mark.parametrize("n, pools, msg", [
    (3, [[0, 0]], "duplicate"),
    (3, [[0, 3]], "out of range"),
    (3, [[-1]], "out of range"),
    (0, [[0]], "n_variables"),
    (3, [], "at least one test"),
])
def test_invalid_designs(n, pools, msg):
    with pytest.raises(DesignError, match=msg):
        PoolDesign(n, pools)


def test_declared_m_mismatch():
    with pytest.raises(DesignError):
        PoolDesign(2, [[0]], n_tests=2)


def test_csr_rejects_unsorted():
    with pytest.raises(DesignError, match="not sorted"):
        PoolDesign.from_csr(3, [0, 2], [2, 1])


def test_from_edges_matches_lists():
    d = PoolDesign.from_edges(4, 3, [3, 0, 1, 2, 0], [0, 0, 1, 2, 2])
    assert d.tests == ((0, 3), (1,), (0, 2))
    assert d == PoolDesign(4, [[0, 3], [1], [0, 2]])


def test_empty_pool_allowed():
    d = PoolDesign(2, [[], [0, 1]])
    assert d.tests == ((), (0, 1))
    assert degree_profile(d)[1].tolist() == [0, 2]


@given(designs())
def test_dense_roundtrip(d):
    c = d.to_dense()
    assert c.sum() == d.n_edges
    rebuilt = PoolDesign(d.n_variables, [np.flatnonzero(c[:, a]) for a in range(d.n_tests)])
    assert rebuilt == d
    for i in range(d.n_variables):
        assert list(d.tests_of(i)) == np.flatnonzero(c[i]).tolist()


@given(designs())
def test_cycle_counts_match_pair_overlaps(d):
    c = d.to_dense().astype(int)
    share = c @ c.T
    np.fill_diagonal(share, 0)
    expect = (share * (share - 1) // 2).sum(axis=1)
    counts, type_d = four_cycle_counts(d)
    assert counts.tolist() == expect.tolist()
    assert type_d.tolist() == (share >= 3).any(axis=1).tolist()
    assert girth_at_least_6(d) == (share.max(initial=0) <= 1)


@given(designs())
def test_census_consistent_with_counts(d):
    counts, type_d = four_cycle_counts(d)
    for i in range(d.n_variables):
        cen = four_cycle_census(d, i)
        assert cen.four_cycle_count == counts[i]
        assert cen.has_type_d == type_d[i]
        assert sorted(cen.tests_on_cycles + cen.tests_off_cycles) == list(d.tests_of(i))


def test_census_hand_example():
    d = PoolDesign(2, [[0, 1]] * 3)
    cen = four_cycle_census(d, 0)
    assert cen.four_cycle_count == 3 and cen.has_type_d
    assert cen.tests_on_cycles == (0, 1, 2)
    assert cen.exceeds(2) and not cen.exceeds(3)
    with pytest.raises(IndexError):
        four_cycle_census(d, 2)


def test_assignment_validation():
    assert as_assignment([1, 0, 1], 3).dtype == np.uint8
    with pytest.raises(ValueError):
        as_assignment([1, 0], 3)
    with pytest.raises(ValueError):
        as_assignment([2, 0, 1], 3)


@pytest.mark.parametrize("suffix", [".json", ".txt"])
@given(d=designs())
def test_save_load_roundtrip(tmp_path_factory, suffix, d):
    d = PoolDesign(d.n_variables, d.tests, family="rp", seed=17)
    path = tmp_path_factory.mktemp("io") / f"d{suffix}"
    save_design(d, path)
    back = load_design(path)
    assert back == d and back.family == "rp" and back.seed == 17


def test_adjacency_format_layout(tmp_path):
    path = tmp_path / "d.adj"
    save_design(PoolDesign(3, [[0, 1], [], [2]]), path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1:] == ["3 3", "0 1", "", "2"]


@pytest.mark.parametrize("text, err", [
    ("3 2\n0 1\n", DesignError),
    ("3 1\n0 5\n", DesignError),
    ("3 1\n1 1\n", DesignError),
    ("3\n0\n", DesignFormatError),
    ("3 1\n0 x\n", DesignFormatError),
    ("", DesignFormatError),
])
def test_adjacency_errors(tmp_path, text, err):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(err):
        load_design(path)


def test_format_error_carries_location(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# c\n3 1\n0 x\n")
    with pytest.raises(DesignFormatError) as info:
        load_design(path)
    assert info.value.line == 3 and str(path) in str(info.value)


@pytest.mark.parametrize("data", [
    {"n_variables": 2, "tests": [[0]]},
    {"n_variables": "2", "n_tests": 1, "tests": [[0]]},
    {"n_variables": 2, "n_tests": 1, "tests": [[0, True]]},
    [1, 2],
])
def test_json_schema_errors(data):
    with pytest.raises(DesignFormatError):
        design_from_dict(data)


def test_json_bad_syntax(tmp_path):
    path = tmp_path / "d.json"
    path.write_text("{ nope")
    with pytest.raises(DesignFormatError):
        load_design(path)


def test_json_duplicate_is_validation_error(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"n_variables": 2, "n_tests": 1, "tests": [[1, 1]]}))
    with pytest.raises(DesignError, match="duplicate"):
        load_design(path)


def test_equality_and_hash():
    a = PoolDesign(3, [[0, 1], [2]])
    b = PoolDesign(3, [[1, 0], [2]])
    assert a == b and hash(a) == hash(b)
    assert a != PoolDesign(3, [[0, 1], [2]], seed=1)
    assert "N=3" in repr(a)
