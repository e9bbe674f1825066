import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import design_and_assignment
from grouptest.core import PoolDesign
from grouptest.decode import count_undetermined, decode_two_stage, parse_assignment, run_tests
from oracles import brute_decode


def test_single_positive(path_design):
    r = decode_two_stage(path_design, [1, 0, 0])
    assert r.sure_zeros == (1, 2) and r.sure_ones == (0,)
    assert r.undetermined_zeros == () and r.undetermined_ones == ()
    assert r.total_tests == 2


def test_two_positives(path_design):
    r = decode_two_stage(path_design, [1, 1, 0])
    assert r.sure_zeros == () and r.sure_ones == ()
    assert r.undetermined_zeros == (2,) and r.undetermined_ones == (0, 1)
    assert r.total_tests == 5


def test_all_zero_needs_only_first_stage(path_design):
    assert decode_two_stage(path_design, [0, 0, 0]).total_tests == 2


def test_uncovered_variable_is_always_undetermined():
    d = PoolDesign(3, [[0, 1]])
    assert decode_two_stage(d, [0, 0, 0]).undetermined_zeros == (2,)
    assert decode_two_stage(d, [0, 0, 1]).undetermined_ones == (2,)


def test_sure_ones_take_one_pass_only():
    # 2 is certified only after 1 is known to be a one, which this decoder never uses
    d = PoolDesign(3, [[0], [0, 1], [1, 2]])
    r = decode_two_stage(d, [0, 1, 1])
    assert r.sure_zeros == (0,) and r.sure_ones == (1,)
    assert r.undetermined_ones == (2,)


def test_empty_pool_reads_negative():
    d = PoolDesign(2, [[], [0, 1]])
    assert run_tests(d, [1, 1]).tolist() == [0, 1]


@given(design_and_assignment())
def test_matches_definitions(case):
    d, x = case
    s0, s1, u0, u1 = brute_decode(d.tests, d.n_variables, x.tolist())
    r = decode_two_stage(d, x)
    assert set(r.sure_zeros) == s0 and set(r.sure_ones) == s1
    assert set(r.undetermined_zeros) == u0 and set(r.undetermined_ones) == u1
    assert r.total_tests == d.n_tests + len(u0) + len(u1)


@given(design_and_assignment())
def test_partition_and_soundness(case):
    d, x = case
    r = decode_two_stage(d, x)
    parts = [set(r.sure_zeros), set(r.sure_ones), set(r.undetermined_zeros), set(r.undetermined_ones)]
    assert set().union(*parts) == set(range(d.n_variables))
    assert sum(len(p) for p in parts) == d.n_variables
    assert all(x[i] == 0 for i in r.sure_zeros) and all(x[i] == 1 for i in r.sure_ones)
    assert d.n_tests <= r.total_tests <= d.n_tests + d.n_variables


@given(design_and_assignment())
def test_count_matches_decode(case):
    d, x = case
    r = decode_two_stage(d, x)
    assert count_undetermined(d, x) == (len(r.undetermined_zeros), len(r.undetermined_ones))
    u0, u1 = count_undetermined(d, np.stack([x, 1 - x]))
    assert (int(u0[0]), int(u1[0])) == count_undetermined(d, x)
    assert (int(u0[1]), int(u1[1])) == count_undetermined(d, 1 - x)


def test_batch_shape_checked(path_design):
    with pytest.raises(ValueError):
        count_undetermined(path_design, np.zeros((2, 4), dtype=np.uint8))


def test_parse_binary_and_hex():
    assert parse_assignment("100", 3).tolist() == [1, 0, 0]
    assert parse_assignment("0x1", 3).tolist() == [1, 0, 0]
    assert parse_assignment("0x6", 3).tolist() == [0, 1, 1]
    assert parse_assignment("1_1 ", 2).tolist() == [1, 1]


@pytest.mark.parametrize("text", ["102", "", "0x8", "10"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_assignment(text, 3)


@given(design_and_assignment(), st.data())
def test_flipping_to_defective_never_shrinks_u0(case, data):
    d, x = case
    zeros = np.flatnonzero(x == 0)
    if zeros.size == 0:
        return
    j = int(data.draw(st.sampled_from(zeros.tolist())))
    before = set(decode_two_stage(d, x).undetermined_zeros) - {j}
    y = x.copy()
    y[j] = 1
    after = set(decode_two_stage(d, y).undetermined_zeros)
    assert before <= after


def test_all_ones_single_pool():
    d = PoolDesign(4, [[0, 1, 2, 3]])
    r = decode_two_stage(d, [1, 1, 1, 1])
    assert r.sure_ones == () and len(r.undetermined_ones) == 4 and r.total_tests == 5
    r = decode_two_stage(PoolDesign(1, [[0]]), [1])
    assert r.sure_ones == (0,) and r.total_tests == 1
