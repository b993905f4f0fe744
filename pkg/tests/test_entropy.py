import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import entropy as scipy_entropy

from fakeview.entropy import (
    PopularityDistribution, RunningEntropy, col_entropy, col_profiles, entropy,
    entropy_after_new_item, entropy_after_repeat_item, limit_entropy, row_entropy, row_profiles,
)
from fakeview.errors import InvalidEntropyError, NotFoundError
from fakeview.matrix import AccessMatrix

count_vectors = st.lists(st.integers(1, 10**6), min_size=1, max_size=60)


def test_uniform():
    assert entropy([1, 1, 1, 1]) == pytest.approx(1.386294, abs=1e-6)


def test_single_video_case():
    # 10552 views, all from one IP
    assert entropy([10552]) == 0


def test_known_value():
    # frozen from scipy.stats.entropy([5, 3, 2])
    assert entropy([5, 3, 2]) == pytest.approx(1.029653, abs=1e-6)
    assert entropy([5, 3, 2]) == pytest.approx(scipy_entropy([5, 3, 2]), abs=1e-12)


def test_degenerate_inputs():
    assert entropy([]) == 0
    assert entropy([0, 0]) == 0
    assert entropy([0, 7, 0]) == 0
    assert entropy({"a": 2, "b": 2}) == pytest.approx(math.log(2))
    assert entropy(np.array([1, 1])) == pytest.approx(math.log(2))


@given(count_vectors)
def test_bounds_and_scipy_agreement(c):
    h = entropy(c)
    assert 0 <= h <= math.log(len(c))
    assert h == pytest.approx(scipy_entropy(c), abs=1e-9)


@given(count_vectors, st.randoms())
def test_permutation_invariance(c, rnd):
    shuffled = list(c)
    rnd.shuffle(shuffled)
    assert entropy(shuffled) == pytest.approx(entropy(c), abs=1e-12)


def test_long_row_uses_compensated_sum():
    c = [1, 2, 3] * 20_000
    assert entropy(c) == pytest.approx(scipy_entropy(c), abs=1e-10)


def test_row_and_col_entropy():
    m = AccessMatrix.from_rows({"a": {"v1": 3}, "b": {"v1": 1, "v2": 1, "v3": 1}, "c": {"v1": 5, "v2": 3, "v3": 2}})
    assert row_entropy(m, "a") == 0
    assert row_entropy(m, "b") == pytest.approx(math.log(3), abs=1e-12)
    assert row_entropy(m, "c") == pytest.approx(entropy([5, 3, 2]))
    assert col_entropy(m, "v1") == pytest.approx(entropy([3, 1, 5]))
    with pytest.raises(NotFoundError):
        row_entropy(m, "zz")
    with pytest.raises(NotFoundError):
        col_entropy(m, "zz")
    profs = row_profiles(m)
    assert profs["c"].total_views == 10 and profs["c"].distinct == 3
    cprofs = col_profiles(m)
    assert cprofs["v1"].total_views == 9 and cprofs["v1"].distinct == 3


def test_uniform_column_bound_vs_concentrated_column():
    uniform = AccessMatrix.from_rows({f"ip{i}": {"vid": 1} for i in range(162)})
    assert col_entropy(uniform, "vid") == pytest.approx(5.088, abs=1e-3)
    single = AccessMatrix.from_rows({"ip": {"vid": 10552}})
    assert col_entropy(single, "vid") == 0


@given(st.dictionaries(st.text(min_size=1, max_size=4), st.integers(1, 1000), min_size=1, max_size=40))
def test_row_entropy_matches_extraction(row):
    m = AccessMatrix.from_rows({"x": row})
    assert row_entropy(m, "x") == pytest.approx(entropy(list(row.values())), abs=1e-12)


@given(st.integers(1, 5000))
def test_all_ones_row_is_log_w(w):
    m = AccessMatrix.from_rows({"ip": {f"v{j}": 1 for j in range(w)}})
    assert abs(row_entropy(m, "ip") - math.log(w)) <= 1e-12


def test_new_item_examples():
    assert entropy_after_new_item(0, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert entropy_after_new_item(math.log(3), 3) == pytest.approx(math.log(4), abs=1e-12)
    h = entropy_after_new_item(entropy([5, 3, 2]), 10)
    assert abs(h - entropy([5, 3, 2, 1])) <= 1e-9


def test_new_item_rejects_impossible_entropy():
    with pytest.raises(InvalidEntropyError):
        entropy_after_new_item(math.log(3) + 1e-6, 3)
    with pytest.raises(ValueError):
        entropy_after_new_item(0.0, 0)


@given(count_vectors)
def test_new_item_increases_and_matches_recompute(c):
    h = entropy(c)
    h2 = entropy_after_new_item(h, sum(c))
    assert h2 > h
    assert abs(h2 - entropy(c + [1])) <= 1e-9


def test_repeat_item_examples():
    # entropy([2, 1]) frozen from scipy.stats.entropy
    assert entropy_after_repeat_item([1, 1], 0) == pytest.approx(0.636514, abs=1e-6)
    assert entropy_after_repeat_item([1000000, 1], 0) < entropy([1000000, 1])
    assert entropy_after_repeat_item([1], 0) == 0
    assert entropy_after_repeat_item({"a": 2, "b": 1}, "b") == pytest.approx(math.log(2))
    with pytest.raises(NotFoundError):
        entropy_after_repeat_item([1, 0], 1)
    with pytest.raises(NotFoundError):
        entropy_after_repeat_item({"a": 1}, "b")


@given(count_vectors, st.data())
def test_repeat_item_matches_recompute(c, data):
    k = data.draw(st.integers(0, len(c) - 1))
    bumped = list(c)
    bumped[k] += 1
    assert abs(entropy_after_repeat_item(c, k) - entropy(bumped)) <= 1e-9


@given(st.lists(st.integers(0, 30), max_size=200))
def test_running_entropy_tracks_counts(stream):
    acc = RunningEntropy()
    counts = {}
    for item in stream:
        acc.add(counts.get(item, 0))
        counts[item] = counts.get(item, 0) + 1
        assert abs(acc.value - entropy(list(counts.values()))) <= 1e-9


def test_limit_entropy_examples():
    assert limit_entropy([1 / 8] * 8) == pytest.approx(math.log(8), abs=1e-12)
    assert limit_entropy({"a": 0.5, "b": 0.3, "c": 0.2}) == pytest.approx(1.029653, abs=1e-6)
    assert limit_entropy({"only": 1.0}) == 0


def test_popularity_validation():
    with pytest.raises(ValueError):
        PopularityDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        PopularityDistribution([1.0, 0.0])
    with pytest.raises(ValueError):
        PopularityDistribution.zipf(5, 0)
    z = PopularityDistribution.zipf(4, 1.0, keys=list("abcd"))
    assert z.as_dict()["a"] == pytest.approx(1 / (1 + 1 / 2 + 1 / 3 + 1 / 4))


def test_tallies_converge_to_limit():
    rng = np.random.default_rng(3)
    for n_keys in (5, 20, 50):
        p = PopularityDistribution.zipf(n_keys, 1.0)
        draws = p.sample_indices(rng, 100 * n_keys)
        tallies = np.bincount(draws, minlength=n_keys)
        assert abs(entropy(tallies) - limit_entropy(p)) <= 0.05
