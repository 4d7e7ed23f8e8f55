import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obesity_heuristic.dedup import (
    Calibration,
    CandidatePair,
    Decision,
    KeySpec,
    MatchPolicy,
    Record,
    classify,
    edit_distance,
    field_similarity,
    normalize,
    normalize_text,
    policy_fitness,
    policy_objective,
    record_similarity,
    resolve_backlog,
    score_pairs,
    sort_and_window,
    token_key,
)
from obesity_heuristic.errors import ConfigurationError, InputError

from oracles import all_pairs, bfs_edit_distance, dl_distance, window_pairs

text = st.text(alphabet="abcAB ,.-xyz", max_size=8)


def rec(i, *fields):
    return Record(i, tuple(fields))


# -- normalize ----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [("JOHN  Smith,", "john smith"), ("john smith", "john smith"), ("", ""),
     ("  O'Brien -  Jr. ", "obrien jr"), ("a_b", "ab")],
)
def test_normalize_text(raw, expected):
    assert normalize_text(raw) == expected


@given(text)
def test_normalize_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


def test_normalize_record_keeps_id():
    r = normalize(rec(4, "JOHN  Smith,", ""))
    assert r == rec(4, "john smith", "")


# -- token_key ----------------------------------------------------------------


def test_token_key_hand_trace():
    spec = KeySpec(token_count=3, prefix_len=4)
    assert token_key(rec(0, "John Smith", "NY"), spec) == "johnnysmit"


def test_token_key_order_and_case_invariant():
    spec = KeySpec(3, 4)
    assert token_key(rec(0, "Smith John"), spec) == token_key(rec(1, "john SMITH"), spec)


def test_token_key_all_empty():
    assert token_key(rec(0, "", " "), KeySpec()) == ""


def test_token_key_fields_used():
    spec = KeySpec(3, 4, fields_used=(1,))
    assert token_key(rec(0, "zzz", "Bob Ann"), spec) == "annbob"


@given(st.lists(st.sampled_from(["alpha", "Beta", "gamma,", "DELTA", "eps"]), min_size=1, max_size=5),
       st.randoms())
def test_token_key_permutation_invariant(tokens, rnd):
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    spec = KeySpec(2, 3)
    assert token_key(rec(0, " ".join(tokens)), spec) == token_key(
        rec(1, " ".join(t.upper() for t in shuffled)), spec
    )


@pytest.mark.parametrize("kw", [dict(token_count=0), dict(prefix_len=0)])
def test_keyspec_validation(kw):
    with pytest.raises(ConfigurationError):
        KeySpec(**kw)


# -- sort_and_window ----------------------------------------------------------


def five_records():
    return [rec(i, name) for i, name in enumerate(["adams", "baker", "clark", "davis", "evans"])]


def test_window_five_records_w3():
    pairs = sort_and_window(five_records(), 3)
    # hand enumeration over sorted positions 1..5
    expected = {(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)}
    assert {p.key for p in pairs} == expected
    assert len(pairs) == 7


@pytest.mark.parametrize("n, w", [(5, 3), (10, 2), (10, 4), (30, 7), (7, 7)])
def test_window_pair_count_formula(n, w):
    records = [rec(i, f"name{i:03d}") for i in range(n)]
    pairs = sort_and_window(records, w)
    assert len(pairs) == (w - 1) * n - (w - 1) * w // 2
    # brute-force enumeration over sorted positions
    assert {p.key for p in pairs} == window_pairs(list(range(n)), w)


def test_full_window_equals_all_pairs():
    records = [rec(i, random.Random(i).choice(["a", "b", "c"])) for i in range(9)]
    pairs = sort_and_window(records, 9)
    assert {p.key for p in pairs} == all_pairs(range(9))


def test_window_single_record():
    assert sort_and_window([rec(0, "x")], 5) == []


def test_window_too_small():
    with pytest.raises(ConfigurationError):
        sort_and_window(five_records(), 1)


def test_window_ties_broken_by_id():
    records = [rec(i, "same") for i in (5, 2, 9, 1)]
    pairs = sort_and_window(records, 2)
    assert [p.key for p in pairs] == [(1, 2), (2, 5), (5, 9)]


def test_window_pairs_canonical():
    records = [rec(9, "aaa"), rec(1, "zzz")]
    assert [p.key for p in sort_and_window(records, 2)] == [(1, 9)]


@settings(max_examples=40)
@given(st.lists(text, min_size=0, max_size=25), st.integers(2, 30))
def test_window_subset_of_all_pairs(names, w):
    records = [rec(i, s) for i, s in enumerate(names)]
    keys = {p.key for p in sort_and_window(records, w)}
    assert keys <= all_pairs(range(len(records)))
    if w >= len(records):
        assert keys == all_pairs(range(len(records)))


# -- edit distance and similarity --------------------------------------------


@settings(max_examples=150)
@given(st.text(alphabet="abc", max_size=4), st.text(alphabet="abc", max_size=4))
def test_edit_distance_matches_search_oracle(a, b):
    assert edit_distance(a, b) == bfs_edit_distance(a, b)


@settings(max_examples=150)
@given(st.text(alphabet="abcdefgh ", max_size=12), st.text(alphabet="abcdefgh ", max_size=12))
def test_edit_distance_matches_dp_oracle(a, b):
    assert edit_distance(a, b) == dl_distance(a, b)


def test_field_similarity_examples():
    assert field_similarity("smith", "smith") == 1.0
    assert bfs_edit_distance("smith", "smyth") == 1
    assert field_similarity("smith", "smyth") == pytest.approx(0.8)
    assert bfs_edit_distance("abc", "xyz") == 3
    assert field_similarity("abc", "xyz") == 0.0
    assert field_similarity("", "") == 1.0
    assert field_similarity("", "abc") == 0.0


@given(text, text)
def test_field_similarity_range_and_symmetry(a, b):
    s = field_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == field_similarity(b, a)
    assert field_similarity(a, a) == 1.0


# -- record similarity --------------------------------------------------------


def test_record_similarity_weighted_mean():
    pol = MatchPolicy((0.5, 0.5))
    left, right = rec(0, "smith", "ab"), rec(1, "smyth", "ab")
    assert record_similarity(left, right, pol) == pytest.approx(0.9)


def test_record_similarity_identical():
    pol = MatchPolicy((0.2, 0.3, 0.5))
    r = rec(0, "ann", "lee", "york")
    assert record_similarity(r, rec(1, *r.fields), pol) == 1.0


def test_record_similarity_weight_masking():
    pol = MatchPolicy((1.0, 0.0))
    assert record_similarity(rec(0, "same", "abc"), rec(1, "same", "xyz"), pol) == 1.0


def test_record_similarity_schema_mismatch():
    with pytest.raises(InputError):
        record_similarity(rec(0, "a", "b"), rec(1, "a"), MatchPolicy((0.5, 0.5)))
    with pytest.raises(InputError):
        record_similarity(rec(0, "a"), rec(1, "a"), MatchPolicy((0.5, 0.5)))


weights = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda w: sum(w) > 1e-6)


@settings(max_examples=80)
@given(st.tuples(text, text, text), st.tuples(text, text, text), weights)
def test_record_similarity_symmetric_and_contained(fa, fb, raw):
    total = sum(raw)
    pol = MatchPolicy(tuple(w / total for w in raw))
    a, b = normalize(Record(0, fa)), normalize(Record(1, fb))
    s = record_similarity(a, b, pol)
    assert s == record_similarity(b, a, pol)
    assert 0.0 <= s <= 1.0


# -- policy -------------------------------------------------------------------


def test_policy_validation():
    with pytest.raises(ConfigurationError):
        MatchPolicy((0.5, 0.6))
    with pytest.raises(ConfigurationError):
        MatchPolicy((1.0,), 0.9, 0.8)
    with pytest.raises(ConfigurationError):
        MatchPolicy((-0.5, 1.5))
    with pytest.raises(ConfigurationError):
        MatchPolicy((1.0,), -0.1, 0.5)


def test_policy_genome_decode_renormalizes_and_swaps():
    pol = MatchPolicy.from_genome([0.2, 0.6, 0.9, 0.3], 2)
    assert pol.weights == pytest.approx((0.25, 0.75))
    assert (pol.theta_low, pol.theta_high) == (0.3, 0.9)


def test_policy_genome_all_zero_weights():
    pol = MatchPolicy.from_genome([0, 0, 0, 0.1, 0.2], 3)
    assert pol.weights == pytest.approx((1 / 3,) * 3)


@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5))
def test_policy_genome_always_feasible(g):
    pol = MatchPolicy.from_genome(g, 3)
    assert abs(sum(pol.weights) - 1) < 1e-9
    assert 0 <= pol.theta_low <= pol.theta_high <= 1


def test_policy_genome_roundtrip():
    pol = MatchPolicy((0.25, 0.75), 0.4, 0.7)
    again = MatchPolicy.from_genome(pol.to_genome(), 2)
    assert again.weights == pytest.approx(pol.weights)
    assert (again.theta_low, again.theta_high) == (0.4, 0.7)


# -- classify -------------------------------------------------------------------


def test_classify_regions():
    pol = MatchPolicy((1.0,), 0.6, 0.85)
    assert classify(0.9, pol) is Decision.DUPLICATE
    assert classify(0.85, pol) is Decision.DUPLICATE
    assert classify(0.7, pol) is Decision.AMBIGUOUS
    assert classify(0.6, pol) is Decision.AMBIGUOUS
    assert classify(0.59, pol) is Decision.NON_DUPLICATE


@given(st.floats(0, 1), st.floats(0, 1))
def test_zero_width_band_never_ambiguous(score, theta):
    pol = MatchPolicy((1.0,), theta, theta)
    assert classify(score, pol) is not Decision.AMBIGUOUS


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_classification_partition(score, a, b):
    lo, hi = sorted((a, b))
    d = classify(score, MatchPolicy((1.0,), lo, hi))
    regions = [score >= hi, lo <= score < hi, score < lo]
    assert sum(regions) == 1
    assert d is [Decision.DUPLICATE, Decision.AMBIGUOUS, Decision.NON_DUPLICATE][regions.index(True)]


# -- policy fitness -----------------------------------------------------------


def test_policy_fitness_perfect():
    cal = Calibration([[1.0], [0.9], [0.1]], [True, True, False])
    assert policy_fitness(MatchPolicy((1.0,), 0.5, 0.8), cal) == 1.0


def test_policy_fitness_no_correct_positives():
    cal = Calibration([[1.0], [0.1]], [False, True])
    assert policy_fitness(MatchPolicy((1.0,), 0.5, 0.8), cal) == 0.0
    # nothing predicted
    assert policy_fitness(MatchPolicy((1.0,), 0.5, 1.0), Calibration([[0.2]], [True])) == 0.0


def test_policy_fitness_half_half():
    # predicted: a (true), b (false); truth: a, c -> precision 0.5, recall 0.5
    cal = Calibration([[0.9], [0.95], [0.1]], [True, False, True])
    assert policy_fitness(MatchPolicy((1.0,), 0.5, 0.85), cal) == pytest.approx(0.5)


def test_policy_fitness_ambiguous_not_identified():
    cal = Calibration([[0.7]], [True])
    assert policy_fitness(MatchPolicy((1.0,), 0.6, 0.85), cal) == 0.0


def test_calibration_empty():
    with pytest.raises(ConfigurationError):
        Calibration(np.zeros((0, 2)), [])


def test_policy_objective_bounds_and_value():
    cal = Calibration([[1.0, 0.0], [0.0, 1.0]], [True, False])
    obj = policy_objective(cal)
    assert obj.dim == 4
    assert obj(np.array([1.0, 0.0, 0.5, 0.9])) == 1.0


# -- backlog ------------------------------------------------------------------


def _backlog():
    records = {0: rec(0, "smith", "ab"), 1: rec(1, "smyth", "ab"), 2: rec(2, "smith", "xy")}
    pol = MatchPolicy((0.5, 0.5), 0.6, 0.95)
    scored = score_pairs([CandidatePair(0, 1), CandidatePair(0, 2)], records, pol)
    return records, pol, [p for p in scored if p.decision is Decision.AMBIGUOUS]


def test_resolve_backlog_zero_width_band():
    records, pol, backlog = _backlog()
    assert backlog
    out = resolve_backlog(backlog, MatchPolicy((0.5, 0.5), 0.7, 0.7), records)
    assert all(p.decision is not Decision.AMBIGUOUS for p in out)


def test_resolve_backlog_unchanged_policy():
    records, pol, backlog = _backlog()
    out = resolve_backlog(backlog, pol, records)
    assert [p.decision for p in out] == [p.decision for p in backlog]
    assert [p.score for p in out] == [p.score for p in backlog]


def test_resolve_backlog_empty():
    assert resolve_backlog([], MatchPolicy((1.0,))) == []


def test_candidate_pair_canonical():
    assert CandidatePair.of(5, 2).key == (2, 5)
    with pytest.raises(ValueError):
        CandidatePair(3, 3)
