import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialcircuits.circuit_builder import (Circuit, CircuitEdge, CircuitVariant, EmptyFamily, Perturbation,
                                            build_family, default_variants, empirical_baseline, null_circuit,
                                            perturb_circuit)
from socialcircuits.errors import ConfigError, UnknownIndividual
from socialcircuits.event_store import FightSeries, Roster
from socialcircuits.strategy_extraction import DeltaPEdge

IDS = list("ABCDEFGHIJK")
SERIES = FightSeries.from_sets([IDS[:3], IDS[2:6], IDS[5:], ["A", "K"]])


def make_edges(dps, ps=None):
    ps = ps or [0.01] * len(dps)
    return [DeltaPEdge((IDS[k],), (IDS[k + 1],), dp, 10, 5, 2.0, 1.0, 1.0, p)
            for k, (dp, p) in enumerate(zip(dps, ps))]


def test_identity_variant_keeps_weights_verbatim():
    dps = [0.31, -0.2, 0.15, 0.9, -0.77, 0.05, 0.4, -0.01, 0.22, 0.6]
    [c] = build_family(make_edges(dps), SERIES, [CircuitVariant("all", "measured")])
    assert [e.weight for e in c.edges] == dps
    assert c.baseline_map == {x: v / 4 for x, v in {"A": 2, "B": 1, "C": 2, "D": 1, "E": 1, "F": 2, "G": 1,
                                                    "H": 1, "I": 1, "J": 1, "K": 2}.items()}


def test_measured_weights_clipped_into_range():
    # ΔP can dip below -1 when the source is in the final event
    [c] = build_family(make_edges([-1.2, 0.5]), SERIES, [CircuitVariant("all", "measured")])
    assert c.weights.tolist() == [-1.0, 0.5]


def test_significant_only_empty_is_reported():
    edges = make_edges([0.3, 0.2], ps=[0.5, 0.5])
    with pytest.warns(EmptyFamily):
        fam = build_family(edges, SERIES, [CircuitVariant("significant_only", alpha=0.05),
                                           CircuitVariant("all")])
    assert len(fam) == 1 and fam[0].variant.inclusion == "all"


def test_top_k_keeps_largest():
    edges = make_edges([0.1, 0.3, 0.4, 0.2])
    [c] = build_family(edges, SERIES, [CircuitVariant("top_k", k=3)])
    assert sorted(abs(e.weight) for e in c.edges) == [0.2, 0.3, 0.4]


def test_positive_only():
    [c] = build_family(make_edges([0.1, -0.3, 0.4]), SERIES, [CircuitVariant("positive_only")])
    assert all(e.weight > 0 for e in c.edges) and len(c.edges) == 2


def test_weight_treatments():
    edges = make_edges([0.2, -0.4, 0.6])
    [s, u] = build_family(edges, SERIES, [CircuitVariant("all", "sign_only"),
                                          CircuitVariant("all", "uniform_magnitude")])
    np.testing.assert_allclose(s.weights, [0.4, -0.4, 0.4])
    np.testing.assert_allclose(u.weights, [0.3, -0.3, 0.3])


def test_build_family_deterministic_and_valid():
    edges = make_edges([0.2, -0.4, 0.6, 0.1], ps=[0.01, 0.2, 0.03, 0.9])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyFamily)
        a = build_family(edges, SERIES, default_variants())
        b = build_family(list(edges), SERIES, default_variants())
    assert [c.dumps() for c in a] == [c.dumps() for c in b]
    for c in a:
        assert all(-1 <= e.weight <= 1 for e in c.edges)


def test_no_variants_rejected():
    with pytest.raises(ConfigError):
        build_family(make_edges([0.1]), SERIES, [])


def test_circuit_invariants():
    r = Roster.from_ids("ABC")
    base = (0.1, 0.1, 0.1)
    with pytest.raises(UnknownIndividual):
        Circuit(r, (CircuitEdge(("A",), ("Z",), 0.1),), base)
    with pytest.raises(ConfigError):
        Circuit(r, (CircuitEdge(("A",), ("B",), 1.5),), base)
    with pytest.raises(ConfigError):
        Circuit(r, (CircuitEdge(("A",), ("B",), 0.1), CircuitEdge(("A",), ("B",), 0.2)), base)
    with pytest.raises(ConfigError):
        Circuit(r, (), (0.1, 1.1, 0.1))


def test_null_circuit_has_no_edges():
    c = null_circuit(SERIES)
    assert c.edges == () and c.baseline == empirical_baseline(SERIES)


def test_json_roundtrip_and_key_order():
    [c] = build_family(make_edges([0.2, -0.4]), SERIES, [CircuitVariant("all")])
    again = Circuit.from_json(json.loads(c.dumps()))
    assert again == c
    assert list(json.loads(c.dumps())) == sorted(c.to_json())


def _circuit():
    [c] = build_family(make_edges([0.2, -0.4, 0.6, 0.1, -0.9]), SERIES, [CircuitVariant("all")])
    return c


@pytest.mark.parametrize("mode", ["rescale(1.0)", "jitter(0.0)"])
def test_identity_perturbations(mode):
    c = _circuit()
    assert perturb_circuit(c, mode, 17) == c


@settings(max_examples=30)
@given(st.integers(0, 2**63), st.sampled_from(["shuffle_weights", "rescale(2.5)", "rescale(-1)", "jitter(0.3)"]))
def test_perturbation_preserves_topology(seed, mode):
    c = _circuit()
    p = perturb_circuit(c, mode, seed)
    assert [(e.source, e.target) for e in p.edges] == [(e.source, e.target) for e in c.edges]
    assert np.all(np.abs(p.weights) <= 1)
    assert perturb_circuit(c, mode, seed) == p
    if mode == "shuffle_weights":
        assert sorted(p.weights) == sorted(c.weights)


def test_rescale_clips():
    p = perturb_circuit(_circuit(), "rescale(3)", 0)
    np.testing.assert_allclose(p.weights, [0.6, -1.0, 1.0, 0.3, -1.0])


@pytest.mark.parametrize("text", ["rescale", "wobble(1)", "jitter(x)"])
def test_bad_perturbation(text):
    with pytest.raises(ConfigError):
        Perturbation.parse(text)
