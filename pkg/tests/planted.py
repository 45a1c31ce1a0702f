"""Planted-truth generators shared by the oracle and acceptance tests."""

import itertools

import numpy as np

from socialcircuits.circuit_simulator import SimConfig, planted_circuit, simulate
from socialcircuits.event_store import FightSeries, Roster

LETTERS = [chr(65 + k) for k in range(10)]


def letters_roster(n=10):
    return Roster.from_ids(LETTERS[:n])


def pair_edge_series(seed, n_events=2000, weight=0.6, baseline=0.2, null_edges=True):
    """Roster A..J with {A,B}->C planted; {D,E}->F and {G,H}->I carry weight 0."""
    edges = [(["A", "B"], ["C"], weight)]
    if null_edges:
        edges += [(["D", "E"], ["F"], 0.0), (["G", "H"], ["I"], 0.0)]
    c = planted_circuit(letters_roster(), edges, baseline)
    return simulate(c, None, SimConfig(n_events, seed, "random_pair")), c


def pair_triggered_circuit(weight=0.6, baseline=0.3, n=10):
    """Pairs {A,B}->E,F,G and {C,D}->H,I,J, single-source information cancelled.

    Each pair edge comes with a->t and b->t at -weight*pi, where pi is the
    rate of a partner given a nonempty fight, so P(t | a alone) matches
    the marginal and only the pair carries information.
    """
    pi = baseline / (1 - (1 - baseline) ** n)
    delta = weight * pi
    edges = []
    for (a, b), targets in [(("A", "B"), "EFG"), (("C", "D"), "HIJ")]:
        for t in targets:
            edges += [([a, b], [t], weight), ([a], [t], -delta), ([b], [t], -delta)]
    return planted_circuit(letters_roster(n), edges, baseline)


def pair_triggered_series(seed, n_events=2000):
    c = pair_triggered_circuit()
    return simulate(c, None, SimConfig(n_events, seed, "random_pair", min_fight_size=1)), c


def planted_groups(seed, roster_size=15, n_events=400, noise=0.05):
    """Three disjoint groups (3/4/5 members); each fight is one group plus bit flips."""
    rng = np.random.default_rng(seed)
    ids = [f"m{k:02d}" for k in range(roster_size)]
    groups = [list(range(0, 3)), list(range(3, 7)), list(range(7, 12))]
    X = np.zeros((n_events, roster_size), dtype=bool)
    for t in range(n_events):
        g = groups[rng.integers(len(groups))]
        X[t, g] = True
        X[t] ^= rng.random(roster_size) < noise
        if not X[t].any():
            X[t, g] = True
    truth = [{ids[i] for i in g} for g in groups]
    return FightSeries.from_matrix(Roster.from_ids(ids), X), truth


def jaccard(a, b):
    a, b = set(a), set(b)
    return len(a & b) / len(a | b)


def degeneracy_circuits(roster_size=20, seed=0):
    """(weak, strong) circuits for the degeneracy contrast.

    weak: 30 pair->individual edges, |w| <= 0.1, homogeneous baseline.
    strong: two w=0.9 edges from frequent individuals to 5-member target
    tuples, plus 28 zero-weight edges from rarely co-occurring pairs.
    """
    ids = [f"i{k:02d}" for k in range(roster_size)]
    roster = Roster.from_ids(ids)
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(ids, 2))
    pick = rng.choice(len(pairs), 30, replace=False)
    weak = planted_circuit(
        roster,
        [(list(pairs[i]), [ids[int(rng.integers(roster_size))]], float(rng.uniform(-0.1, 0.1))) for i in pick],
        [0.15] * roster_size, name="weak")

    topo = [([ids[0]], ids[4:9]), ([ids[1]], ids[9:14])]
    rare_pairs = list(itertools.combinations(ids[14:20], 2))
    k = 0
    while len(topo) < 30:
        target = [ids[2 + k % 2]] if k < 15 else [ids[4 + k % 10]]
        topo.append((list(rare_pairs[k % len(rare_pairs)]), target))
        k += 1
    base = [0.8, 0.8, 0.1, 0.1] + [0.05] * (roster_size - 4)
    strong = planted_circuit(roster, [(s, t, 0.9 if i < 2 else 0.0) for i, (s, t) in enumerate(topo)], base,
                             name="strong")
    return weak, strong
