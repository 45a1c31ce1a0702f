import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planted import letters_roster, pair_edge_series
from socialcircuits.circuit_builder import null_circuit
from socialcircuits.circuit_simulator import SimConfig, planted_circuit
from socialcircuits.errors import ConfigError, RosterMismatch
from socialcircuits.event_store import FightSeries, Roster
from socialcircuits.metrics import (compare, degeneracy_scan, fight_size_distribution, histogram_csv,
                                    js_divergence, ks_statistic, rank_family)

R = Roster.from_ids("ABCDEF")


def series(*fights):
    return FightSeries.from_masks(R, [R.mask(f) for f in fights])


def test_size_distribution_example():
    d = fight_size_distribution(FightSeries.from_sets([["A", "B"], ["B", "C"], ["A"]]))
    assert d.counts == {2: 2, 1: 1} and d.total == 3
    assert math.isclose(sum(d.probabilities.values()), 1.0, abs_tol=1e-12)


def test_empty_distribution():
    d = fight_size_distribution(FightSeries(R, ()))
    assert d.counts == {} and d.total == 0


def test_hand_computed_ks_js():
    # sizes [2,2,3,4] vs [2,3,3,3]: P = (1/2, 1/4, 1/4), Q = (1/4, 3/4, 0) on sizes 2,3,4
    # CDFs (1/2, 3/4, 1) vs (1/4, 1, 1) -> KS = 1/4
    # M = (3/8, 1/2, 1/8); KL(P|M) = 1/2 log2(4/3) + 1/4 log2(1/2) + 1/4 log2 2 = 1/2 log2(4/3)
    # KL(Q|M) = 1/4 log2(2/3) + 3/4 log2(3/2) = 1/2 log2(3/2); JS = 1/4 (log2(4/3) + log2(3/2)) = 1/4
    a = series("AB", "CD", "ABC", "ABCD")
    b = series("EF", "ABC", "DEF", "BCD")
    rep = compare(a, b)
    assert rep.ks_statistic == pytest.approx(0.25, abs=1e-12)
    assert rep.js_divergence == pytest.approx(0.25, abs=1e-12)


def test_identity_is_zero():
    s, _ = pair_edge_series(0, n_events=200)
    rep = compare(s, s)
    assert rep.ks_statistic == rep.js_divergence == rep.per_individual_rate_rmse == rep.pair_cooccurrence_rmse == 0


def test_disjoint_supports():
    a = series("AB", "CD", "EF")
    b = series("ABCDE", "BCDEF")
    rep = compare(a, b)
    assert rep.ks_statistic == 1.0
    assert rep.js_divergence == pytest.approx(1.0, abs=1e-12)


def test_fine_grained_fields():
    a = series("AB", "AB")
    b = series("CD", "CD")
    rep = compare(a, b)
    # rates differ by 1 on 4 of 6 individuals; co-occurrence by 1 on 2 of 15 pairs
    assert rep.per_individual_rate_rmse == pytest.approx(math.sqrt(4 / 6))
    assert rep.pair_cooccurrence_rmse == pytest.approx(math.sqrt(2 / 15))


def test_roster_mismatch():
    with pytest.raises(RosterMismatch):
        compare(series("AB"), FightSeries.from_sets([["A", "B"]]))


fight_lists = st.lists(st.lists(st.sampled_from("ABCDEF"), min_size=1, max_size=6, unique=True), min_size=1,
                       max_size=30)


@settings(max_examples=60)
@given(fight_lists, fight_lists)
def test_symmetry_and_bounds(fa, fb):
    a, b = series(*fa), series(*fb)
    ab, ba = compare(a, b), compare(b, a)
    assert ab.ks_statistic == pytest.approx(ba.ks_statistic, abs=1e-15)
    assert ab.js_divergence == pytest.approx(ba.js_divergence, abs=1e-12)
    for v in ab.to_json().values():
        assert math.isfinite(v) and v >= 0
    assert 0 <= ab.ks_statistic <= 1 and 0 <= ab.js_divergence <= 1 + 1e-12
    assert fight_size_distribution(a).total == a.T


def test_histogram_csv_header():
    text = histogram_csv(series("AB"), series("ABC"))
    assert text.splitlines() == ["size,observed_prob,simulated_prob", "2,1.0,0.0", "3,0.0,1.0"]


def test_rank_family_planted_first():
    observed, planted = pair_edge_series(1, n_events=1500, weight=0.9, null_edges=False)
    base = planted_circuit(planted.roster, [], planted.baseline, name="zero-edge")
    cfg = SimConfig(1500, 7, "random_pair")
    ranked = rank_family(observed, [base, planted], cfg, replicates=3)
    assert ranked[0].circuit.name == "planted"


def test_rank_family_single():
    s, _ = pair_edge_series(0, n_events=100)
    ranked = rank_family(s, [null_circuit(s)], SimConfig(100, 0), replicates=2)
    assert len(ranked) == 1 and len(ranked[0].replicate_reports) == 2


def test_rank_family_identical_circuits_tie_in_order():
    s, _ = pair_edge_series(0, n_events=150)
    a = planted_circuit(s.roster, [(["A"], ["B"], 0.3)], 0.2, name="first")
    b = planted_circuit(s.roster, [(["A"], ["B"], 0.3)], 0.2, name="second")
    ranked = rank_family(s, [a, b], SimConfig(150, 3, "random_pair"), replicates=2)
    assert ranked[0].report == ranked[1].report
    assert [r.circuit.name for r in ranked] == ["first", "second"]


def test_rank_family_deterministic_across_workers():
    s, c = pair_edge_series(2, n_events=200)
    fam = [null_circuit(s), c]
    a = rank_family(s, fam, SimConfig(200, 1), replicates=3, workers=1)
    b = rank_family(s, fam, SimConfig(200, 1), replicates=3, workers=4)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]


def test_rank_family_needs_replicates():
    s, _ = pair_edge_series(0, n_events=50)
    with pytest.raises(ConfigError):
        rank_family(s, [null_circuit(s)], SimConfig(50), replicates=0)


def test_degeneracy_identity_modes_equal_floor():
    c = planted_circuit(letters_roster(), [(["A", "B"], ["C"], 0.6), (["D"], ["E"], -0.3)], 0.2)
    rep = degeneracy_scan(c, None, ["rescale(1.0)", "jitter(0.0)", "shuffle_weights"], 6,
                          SimConfig(400, 5, "random_pair"))
    assert rep.per_mode["rescale(1)"] == rep.floor
    assert rep.per_mode["jitter(0)"] == rep.floor
    assert len(rep.per_mode["shuffle_weights"]) == 6
    j = rep.to_json()
    assert j["per_mode"]["rescale(1)"]["median"] == j["floor_median"]


def test_degeneracy_needs_perturbations():
    c = planted_circuit(letters_roster(), [], 0.2)
    with pytest.raises(ConfigError):
        degeneracy_scan(c, None, ["shuffle_weights"], 0, SimConfig(10, 0, "random_pair"))
