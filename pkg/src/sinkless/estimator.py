"""Exact and Monte Carlo probabilities of sink / forbidden-configuration events.

Exact mode enumerates every tape assignment on the event's access region
and returns a dyadic rational. Monte Carlo mode samples the same region and
attaches a two-sided Hoeffding interval. In both modes an evaluation that
used the tie fallback is counted as a failure, and the probability of such
evaluations is reported separately as ``tie_mass``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .errors import GirthError, PreconditionError
from .graph_core import EdgeColouredGraph
from .local_sim import (DENSE_BITS, MC_STREAM, AlgorithmTable, EdgeAlgorithm, TapeBlock,
                        embed, stream)

__all__ = [
    "ProbEstimate",
    "SiteEvent",
    "site_event",
    "exact_event_probability",
    "mc_event_probability",
    "conditional_probability",
    "conditional_counts",
    "event_probabilities",
    "hoeffding_half_width",
    "estimates_to_csv",
    "SINK",
    "FORBIDDEN",
]

SINK = "sink"
FORBIDDEN = "forbidden"

Evaluator = Callable[[TapeBlock], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ProbEstimate:
    kind: str  # "exact" or "monte_carlo"
    value: Fraction | float
    samples: int
    tie_mass: Fraction | float = Fraction(0)
    ci_low: float | None = None
    ci_high: float | None = None
    site_kind: str = ""
    site: object = None
    seed: int | None = None


@dataclass(frozen=True)
class SiteEvent:
    """An event at one site together with the tape region it reads."""

    region: tuple
    R: int
    evaluate: Evaluator  # block -> (failure incl. ties, tie)


def _algorithm_R(algorithm) -> int:
    if isinstance(algorithm, AlgorithmTable):
        return algorithm.R
    return next(iter(algorithm.values())).R


def site_event(algorithm: AlgorithmTable | EdgeAlgorithm, graph: EdgeColouredGraph,
               event: str, site) -> SiteEvent:
    """Bind an event to a site of ``graph``.

    ``forbidden`` at edge ``(u, v)`` needs a node table; ``sink`` at node ``u``
    needs an edge family (root colour -> edge table).
    """
    R = _algorithm_R(algorithm)
    if event == FORBIDDEN:
        if not isinstance(algorithm, AlgorithmTable) or algorithm.ball.edge_rooted:
            raise PreconditionError("forbidden-configuration events need a node table")
        u, v = sorted(site)
        c = graph.colour_of(u, v)
        pu = embed(graph, u, algorithm.ball).placement
        pv = embed(graph, v, algorithm.ball).placement
        region = tuple(sorted(set(pu) | set(pv)))
        _check_disjoint_union(graph, algorithm.ball.t, region, pu, pv)

        def evaluate(block: TapeBlock):
            iu, iv = block.pack(pu), block.pack(pv)
            fail = (algorithm.lookup(iu) == c) & (algorithm.lookup(iv) == c)
            tie = algorithm.tie_lookup(iu) | algorithm.tie_lookup(iv)
            return fail | tie, tie

        return SiteEvent(region, R, evaluate)

    if event == SINK:
        if isinstance(algorithm, AlgorithmTable):
            raise PreconditionError("sink events need an edge family (colour -> edge table)")
        u = int(site)
        parts = []
        for c in range(graph.d):
            w = graph.neighbour(u, c)
            e = (min(u, w), max(u, w))
            table = algorithm[c]
            placement = embed(graph, e, table.ball).placement
            parts.append((table, placement, 0 if e[0] == u else 1))
        region = tuple(sorted({x for _, pl, _ in parts for x in pl}))

        def evaluate(block: TapeBlock):
            inward = np.ones(len(block), dtype=bool)
            tie = np.zeros(len(block), dtype=bool)
            for table, placement, my_side in parts:
                index = block.pack(placement)
                inward &= table.lookup(index) == my_side
                tie |= table.tie_lookup(index)
            return inward | tie, tie

        return SiteEvent(region, R, evaluate)
    raise PreconditionError(f"unknown event kind {event!r}")


def _check_disjoint_union(graph, t, region, pu, pv):
    # in a tree the two radius-t balls at an edge cover 2 * sum_{k<=t} (d-1)^k nodes
    expected = 2 * sum((graph.d - 1) ** k for k in range(t + 1))
    if len(region) != expected:
        raise GirthError(f"union of radius-{t} balls at an edge is not a tree "
                         f"(girth {graph.girth_report.girth})", graph.girth_report.witness_cycle)


def exact_event_probability(algorithm, graph: EdgeColouredGraph, event: str, site,
                            region: Sequence[Hashable] | None = None,
                            budget: int = DENSE_BITS) -> ProbEstimate:
    """Enumerate all tapes on the access region (or a given superset of it)."""
    se = site_event(algorithm, graph, event, site)
    keys = tuple(se.region) if region is None else tuple(region)
    if not set(se.region) <= set(keys):
        raise PreconditionError("region does not cover the event's access region")
    block = TapeBlock.enumerate(keys, se.R, budget)
    fail, tie = se.evaluate(block)
    total = len(block)
    return ProbEstimate("exact", Fraction(int(fail.sum()), total), total,
                        Fraction(int(tie.sum()), total), site_kind=_site_kind(event), site=site)


def hoeffding_half_width(samples: int, delta: float) -> float:
    return math.sqrt(math.log(2 / delta) / (2 * samples))


def mc_event_probability(algorithm, graph: EdgeColouredGraph, event: str, site, samples: int = 100_000,
                         seed: int = 0, delta: float = 0.01) -> ProbEstimate:
    if samples < 1:
        raise PreconditionError("samples must be positive")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    se = site_event(algorithm, graph, event, site)
    block = TapeBlock.sample(se.region, se.R, samples, stream(seed, MC_STREAM))
    fail, tie = se.evaluate(block)
    est = float(fail.mean())
    h = hoeffding_half_width(samples, delta)
    return ProbEstimate("monte_carlo", est, samples, float(tie.mean()),
                        max(0.0, est - h), min(1.0, est + h),
                        site_kind=_site_kind(event), site=site, seed=seed)


def conditional_counts(evaluate: Callable[[TapeBlock], np.ndarray], fixed_keys: Sequence[Hashable],
                       free_keys: Sequence[Hashable], R: int, budget: int = DENSE_BITS) -> np.ndarray:
    """Event counts over free completions, one entry per fixed-region assignment.

    Entry ``i`` counts the ``2**(R*len(free_keys))`` completions of the
    ``i``-th fixed assignment (packed in ``fixed_keys`` order) under which
    ``evaluate`` is true. Dividing by that power of two gives the exact
    conditional probability.
    """
    fixed_keys, free_keys = list(fixed_keys), list(free_keys)
    if set(fixed_keys) & set(free_keys):
        raise PreconditionError("fixed and free regions must be disjoint")
    block = TapeBlock.enumerate(fixed_keys + free_keys, R, budget)
    hits = np.asarray(evaluate(block), dtype=bool)
    extra = block.accessed - set(fixed_keys) - set(free_keys)
    if extra:
        raise PreconditionError(f"event reads keys outside the partition: {sorted(extra)}")
    return hits.reshape(1 << (R * len(fixed_keys)), 1 << (R * len(free_keys))).sum(axis=1)


def conditional_probability(algorithm, graph: EdgeColouredGraph, event: str, site,
                            fixed: Mapping[Hashable, int], free: Sequence[Hashable] | None = None,
                            budget: int = DENSE_BITS) -> Fraction:
    """``Pr[event | tapes on fixed region]`` by enumerating the free region only."""
    se = site_event(algorithm, graph, event, site)
    if free is None:
        free = [k for k in se.region if k not in fixed]
    free = list(free)
    if set(free) & set(fixed):
        raise PreconditionError("fixed and free regions must be disjoint")
    if not set(se.region) <= set(free) | set(fixed):
        raise PreconditionError("fixed and free regions must cover the event's access region")
    block = TapeBlock.enumerate(free, se.R, budget, fixed=fixed)
    fail, _ = se.evaluate(block)
    return Fraction(int(fail.sum()), len(block))


def event_probabilities(algorithm, graph: EdgeColouredGraph, event: str, mode: str = "exact",
                        aggregate: str = "max", samples: int = 100_000, seed: int = 0,
                        delta: float = 0.01, budget: int = DENSE_BITS):
    """Measure every node (sink) or edge (forbidden); return the worst site or all of them.

    In ``max`` mode the returned estimate is the site with the largest value,
    with ``tie_mass`` replaced by the largest tie mass over all sites.
    """
    sites = list(range(graph.n)) if event == SINK else list(graph.edges)
    out = []
    for site in sites:
        if mode == "exact":
            out.append(exact_event_probability(algorithm, graph, event, site, budget=budget))
        elif mode == "mc":
            out.append(mc_event_probability(algorithm, graph, event, site, samples, seed, delta))
        else:
            raise PreconditionError(f"unknown mode {mode!r}")
    if aggregate == "sites":
        return out
    if aggregate != "max":
        raise PreconditionError(f"unknown aggregate {aggregate!r}")
    worst = max(out, key=lambda e: e.value)
    return ProbEstimate(worst.kind, worst.value, worst.samples, max(e.tie_mass for e in out),
                        worst.ci_low, worst.ci_high, worst.site_kind, worst.site, worst.seed)


def _site_kind(event: str) -> str:
    return "node" if event == SINK else "edge"


CSV_FIELDS = ["site_kind", "site_id", "kind", "num", "den_or_estimate", "ci_low", "ci_high",
              "tie_mass_num", "tie_mass_den", "samples", "seed"]


def estimates_to_csv(estimates: Sequence[ProbEstimate], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for e in estimates:
        site_id = "-".join(map(str, e.site)) if isinstance(e.site, tuple) else e.site
        if e.kind == "exact":
            writer.writerow([e.site_kind, site_id, e.kind, e.value.numerator, e.value.denominator, "", "",
                             e.tie_mass.numerator, e.tie_mass.denominator, e.samples, ""])
        else:
            writer.writerow([e.site_kind, site_id, e.kind, "", repr(e.value), repr(e.ci_low),
                             repr(e.ci_high), repr(e.tie_mass), "", e.samples, e.seed])
    return buf.getvalue()
