import itertools
from fractions import Fraction

import numpy as np
import pytest

from sinkless.errors import GirthError, PreconditionError, ResourceError
from sinkless.estimator import (FORBIDDEN, SINK, conditional_counts, conditional_probability,
                                estimates_to_csv, event_probabilities, exact_event_probability,
                                hoeffding_half_width, mc_event_probability, site_event)
from sinkless.graph_core import EdgeColouredGraph, generate_regular_high_girth
from sinkless.local_sim import AlgorithmTable, CanonicalBall
from sinkless.speedup import random_node_table

from conftest import k4
from oracles import all_assignments


def q_table():
    """0-round, R=2: tapes 0,1 -> colour 0; 2 -> 1; 3 -> 2, so q = (1/2, 1/4, 1/4)."""
    return AlgorithmTable(CanonicalBall(3, 0), 2, np.array([0, 0, 1, 2], dtype=np.int8))


def xor_family(d):
    """t=1, R=1: head side = bit(side 0) xor bit(side 1); each edge is a fair coin given one endpoint."""
    return {c: AlgorithmTable.from_function(CanonicalBall(d, 1, c), 1, lambda tp: tp[0] ^ tp[1])
            for c in range(d)}


@pytest.fixture(scope="module")
def quartic():
    return generate_regular_high_girth(20, 4, 4, seed=0)


def test_zero_round_forbidden_quarter(host20):
    e = next(e for e, c in zip(host20.edges, host20.colours) if c == 0)
    est = exact_event_probability(q_table(), host20, FORBIDDEN, e)
    # oracle: all 16 endpoint tape pairs
    table = [0, 0, 1, 2]
    hits = sum(table[a] == 0 == table[b] for a, b in itertools.product(range(4), repeat=2))
    assert est.value == Fraction(hits, 16) == Fraction(1, 4)
    assert est.samples == 16 and est.tie_mass == 0


def test_constant_table_forbidden_by_edge_colour(host20):
    const = AlgorithmTable.constant(CanonicalBall(3, 1), 1, 0)
    for e, c in zip(host20.edges, host20.colours):
        assert exact_event_probability(const, host20, FORBIDDEN, e).value == (1 if c == 0 else 0)


def test_uniform_directions_give_one_sixteenth(quartic):
    sites = event_probabilities(xor_family(4), quartic, SINK, aggregate="sites")
    assert len(sites) == 20
    assert all(s.value == Fraction(1, 16) for s in sites)
    assert all(s.value.denominator & (s.value.denominator - 1) == 0 for s in sites)


def test_fair_coin_monte_carlo():
    g = EdgeColouredGraph.from_edges(2, 1, [(0, 1)], [0])
    est = mc_event_probability(xor_family(1), g, SINK, 0, samples=100_000, seed=1, delta=0.01)
    assert abs(est.value - 0.5) <= 0.008
    assert est.ci_high - est.value == pytest.approx(hoeffding_half_width(100_000, 0.01))


@pytest.mark.parametrize("seed", range(20))
def test_mc_agrees_with_exact(seed, quartic):
    est = mc_event_probability(xor_family(4), quartic, SINK, seed % 20, samples=20_000, seed=seed)
    assert abs(est.value - 1 / 16) <= hoeffding_half_width(20_000, 0.01)
    assert est.ci_low <= est.value <= est.ci_high


def test_mc_zero_event(host20):
    const = AlgorithmTable.constant(CanonicalBall(3, 1), 1, 0)
    e = next(e for e, c in zip(host20.edges, host20.colours) if c == 1)
    est = mc_event_probability(const, host20, FORBIDDEN, e, samples=500, seed=0)
    assert est.value == 0 and est.ci_low == 0


def test_mc_is_reproducible(host20):
    table = random_node_table(3, 1, 1, 2)
    a = mc_event_probability(table, host20, FORBIDDEN, host20.edges[0], samples=1000, seed=5)
    b = mc_event_probability(table, host20, FORBIDDEN, host20.edges[0], samples=1000, seed=5)
    assert a == b


def test_mc_preconditions(host20):
    table = random_node_table(3, 1, 1, 2)
    with pytest.raises(PreconditionError):
        mc_event_probability(table, host20, FORBIDDEN, host20.edges[0], samples=0)
    with pytest.raises(PreconditionError):
        mc_event_probability(table, host20, FORBIDDEN, host20.edges[0], delta=1.5)


def test_exact_is_partition_order_independent(host20):
    table = random_node_table(3, 1, 1, 3)
    e = host20.edges[4]
    se = site_event(table, host20, FORBIDDEN, e)
    base = exact_event_probability(table, host20, FORBIDDEN, e)
    shuffled = list(reversed(se.region))
    assert exact_event_probability(table, host20, FORBIDDEN, e, region=shuffled).value == base.value
    extra = shuffled + [v for v in range(20) if v not in se.region][:2]
    assert exact_event_probability(table, host20, FORBIDDEN, e, region=extra).value == base.value
    with pytest.raises(PreconditionError):
        exact_event_probability(table, host20, FORBIDDEN, e, region=shuffled[1:])


def test_budget_exceeded(host20):
    table = random_node_table(3, 1, 2, 0)
    with pytest.raises(ResourceError):
        exact_event_probability(table, host20, FORBIDDEN, host20.edges[0], budget=8)


def test_forbidden_needs_tree_union():
    with pytest.raises(GirthError):
        exact_event_probability(random_node_table(3, 1, 1, 0), k4(), FORBIDDEN, (0, 1))


def test_conditional_empty_free_region(host20):
    table = random_node_table(3, 1, 1, 4)
    e = host20.edges[0]
    region = site_event(table, host20, FORBIDDEN, e).region
    for fixed in itertools.islice(all_assignments(region, 1), 50):
        assert conditional_probability(table, host20, FORBIDDEN, e, fixed, free=[]) in (0, 1)


def test_conditional_independent_of_free_region(host20):
    table = random_node_table(3, 0, 2, 7)
    u, v = e = host20.edges[0]
    c = host20.colour_of(u, v)
    for a, b in itertools.product(range(4), repeat=2):
        expected = int(table([a]) == c == table([b]))
        got = conditional_probability(table, host20, FORBIDDEN, e, {u: a, v: b}, free=[0 if u else 1])
        assert got == expected


@pytest.mark.parametrize("seed", range(4))
def test_law_of_total_probability(seed, host20):
    table = random_node_table(3, 1, 1, seed)
    e = host20.edges[seed]
    region = list(site_event(table, host20, FORBIDDEN, e).region)
    total = exact_event_probability(table, host20, FORBIDDEN, e).value
    for split in (1, 3, 5):
        fixed_keys, free_keys = region[:split], region[split:]
        acc = Fraction(0)
        for fixed in all_assignments(fixed_keys, 1):
            acc += conditional_probability(table, host20, FORBIDDEN, e, fixed, free_keys)
        assert acc / 2 ** len(fixed_keys) == total


def test_conditional_counts_against_nested_enumeration():
    table = random_node_table(3, 1, 1, 9)
    words = CanonicalBall(3, 1).addresses
    fixed_keys, free_keys = list(words[:2]), list(words[2:])

    def event(block):
        return table.lookup(block.pack(words)) == 1

    counts = conditional_counts(event, fixed_keys, free_keys, 1)
    for i, fixed in enumerate(all_assignments(fixed_keys, 1)):
        hits = sum(table([{**fixed, **free}[w] for w in words]) == 1 for free in all_assignments(free_keys, 1))
        assert counts[i] == hits


def test_conditional_counts_rejects_bad_partitions():
    with pytest.raises(PreconditionError):
        conditional_counts(lambda b: b.column("a") == 0, ["a"], ["a"], 1)
    with pytest.raises(KeyError):
        conditional_counts(lambda b: b.column("z") == 0, ["a"], ["b"], 1)


def test_csv_rows(quartic):
    sites = event_probabilities(xor_family(4), quartic, SINK, aggregate="sites")[:2]
    mc = mc_event_probability(xor_family(4), quartic, SINK, 0, samples=100, seed=3)
    text = estimates_to_csv(sites + [mc], ["config"])
    lines = text.splitlines()
    assert lines[0] == "# config"
    assert lines[1].split(",")[:4] == ["site_kind", "site_id", "kind", "num"]
    assert lines[2].startswith("node,0,exact,1,16,,,0,1,")
    assert lines[4].split(",")[2] == "monte_carlo" and lines[4].endswith(",100,3")


def test_max_aggregation_keeps_worst_tie_mass(host20):
    sites = event_probabilities(random_node_table(3, 1, 1, 0), host20, FORBIDDEN, aggregate="sites")
    worst = event_probabilities(random_node_table(3, 1, 1, 0), host20, FORBIDDEN)
    assert worst.value == max(s.value for s in sites)
    with pytest.raises(PreconditionError):
        event_probabilities(q_table(), host20, FORBIDDEN, mode="nope")
