import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_null
from socialcircuits.errors import ConfigError, EmptySeries, ExhaustiveTooLarge
from socialcircuits.event_store import FightSeries, Roster, participation_counts
from socialcircuits.null_model import NullConfig, null_stats, permute_series

ABAB = [{"A"}, {"B"}, {"A"}, {"B"}]


def test_single_event_permutation_is_identity():
    s = FightSeries.from_sets([["A", "B"]])
    for k in range(5):
        assert permute_series(s, k, 123) == s


def test_two_event_orders_are_uniform():
    s = FightSeries.from_sets([["A"], ["B"]])
    first_a = sum(permute_series(s, 0, seed).event_members(0) == ("A",) for seed in range(10_000))
    assert abs(first_a / 10_000 - 0.5) <= 0.02


def test_empty_series_cannot_be_permuted():
    with pytest.raises(EmptySeries):
        permute_series(FightSeries(Roster(("A",)), ()), 0, 0)


@settings(max_examples=40)
@given(st.lists(st.lists(st.sampled_from("ABCDE"), min_size=1, max_size=4, unique=True), min_size=1, max_size=25),
       st.integers(0, 2**64 - 1), st.integers(0, 10_000))
def test_permutation_preserves_event_multiset(fights, seed, idx):
    s = FightSeries.from_sets(fights)
    p = permute_series(s, idx, seed)
    assert sorted(p.masks) == sorted(s.masks)
    assert participation_counts(p) == participation_counts(s)


def test_exhaustive_matches_enumeration():
    s = FightSeries.from_sets(ABAB)
    mean, var, vals = exhaustive_null(ABAB, "A", "B")
    assert len(vals) == 24
    stats = null_stats(s, [(("A",), ("B",))], NullConfig(mode="exhaustive"))
    key = (("A",), ("B",))
    assert stats.n_permutations_used == 24
    assert stats.mean_follow_count[key] == pytest.approx(mean, abs=1e-12)
    assert stats.variance[key] == pytest.approx(var, abs=1e-12)
    # 3 adjacencies, each an (A, B) pair with probability 2*2/(4*3)
    assert mean == pytest.approx(1.0)


def test_monte_carlo_within_three_se_of_exhaustive():
    s = FightSeries.from_sets(ABAB)
    mean, var, _ = exhaustive_null(ABAB, "A", "B")
    n = 50_000
    stats = null_stats(s, [(("A",), ("B",))], NullConfig(n_permutations=n, master_seed=9))
    se = math.sqrt(var / n)
    assert abs(stats.mean_follow_count[(("A",), ("B",))] - mean) <= 3 * se


@pytest.mark.parametrize("T", [3, 5, 7])
def test_monte_carlo_converges_small_T(T):
    rng = np.random.default_rng(T)
    fights = [set(rng.choice(list("ABC"), size=rng.integers(1, 3), replace=False)) for _ in range(T)]
    s = FightSeries.from_sets(fights)
    pairs = [(("A",), ("B",)), (("B",), ("C",)), (("A",), ("A",))]
    ex = null_stats(s, pairs, NullConfig(mode="exhaustive"))
    mc = null_stats(s, pairs, NullConfig(n_permutations=20_000, master_seed=1))
    for key in ex.mean_follow_count:
        se = math.sqrt(ex.variance[key] / 20_000)
        assert abs(mc.mean_follow_count[key] - ex.mean_follow_count[key]) <= max(3 * se, 1e-12)


def test_absent_source_has_zero_null():
    roster = Roster.from_ids(["A", "B", "C", "D"])
    s = FightSeries.from_masks(roster, [roster.mask(f) for f in (["A"], ["B"], ["A", "B"], ["C"])])
    stats = null_stats(s, [(("D",), ("A",))], NullConfig(200))
    assert stats.mean_follow_count[(("D",), ("A",))] == 0.0
    assert stats.variance[(("D",), ("A",))] == 0.0


def test_exhaustive_cap():
    s = FightSeries.from_sets([["A"]] * 10)
    with pytest.raises(ExhaustiveTooLarge):
        null_stats(s, [(("A",), ("A",))], NullConfig(mode="exhaustive"))


@pytest.mark.parametrize("kwargs", [{"n_permutations": 0}, {"mode": "bogus"}, {"workers": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        NullConfig(**kwargs)


def test_determinism_across_worker_counts():
    rng = np.random.default_rng(0)
    fights = [list(rng.choice(list("ABCDEF"), size=rng.integers(1, 4), replace=False)) for _ in range(120)]
    s = FightSeries.from_sets(fights)
    pairs = [((a,), (b,)) for a in "ABCDEF" for b in "ABCDEF"]
    ref = null_stats(s, pairs, NullConfig(300, 42, workers=1))
    for w in (2, 3, 7):
        other = null_stats(s, pairs, NullConfig(300, 42, workers=w))
        assert json.dumps(other.to_json(), sort_keys=True) == json.dumps(ref.to_json(), sort_keys=True)


def test_null_bounds_and_json_keys():
    s = FightSeries.from_sets([["A", "B"], ["C"], ["B", "A"], ["C", "A"]])
    stats = null_stats(s, [(("B", "A"), ("C",))], NullConfig(100))
    key = (("A", "B"), ("C",))
    assert 0 <= stats.mean_follow_count[key] <= s.T - 1
    assert stats.variance[key] >= 0
    assert list(stats.to_json()["pairs"]) == ["A+B|C"]
