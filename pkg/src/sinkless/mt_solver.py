"""Distributed Moser-Tardos resampling with Luby's MIS as the selection rule.

Round accounting: each Luby phase costs 2 LOCAL rounds (draw and compare
priorities, then announce joins so neighbours drop out). Each resample
phase costs 1 further round to re-evaluate violations after resampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from .errors import PreconditionError, ResourceError
from .local_sim import LUBY_STREAM, MT_STREAM, stream
from .problems import Assignment, LllInstance, check_assignment

__all__ = ["MisResult", "SolveStats", "luby_mis", "moser_tardos_solve", "default_phase_cap",
           "ROUNDS_PER_LUBY_PHASE"]

ROUNDS_PER_LUBY_PHASE = 2


@dataclass(frozen=True)
class MisResult:
    nodes: frozenset
    phases: int

    @property
    def rounds(self) -> int:
        return ROUNDS_PER_LUBY_PHASE * self.phases


@dataclass
class SolveStats:
    success: bool
    resample_phases: int
    mis_rounds_total: int
    total_rounds: int
    seed: int

    def as_dict(self) -> dict:
        return {"success": self.success, "resample_phases": self.resample_phases,
                "mis_rounds_total": self.mis_rounds_total, "total_rounds": self.total_rounds,
                "seed": self.seed}


def _adjacency(graph) -> dict[Hashable, set]:
    if hasattr(graph, "adj") and hasattr(graph, "nodes"):  # networkx
        return {v: set(graph.adj[v]) - {v} for v in graph.nodes}
    if isinstance(graph, Mapping):
        return {v: set(ns) - {v} for v, ns in graph.items()}
    # EdgeColouredGraph
    return {v: set(ns) for v, ns in enumerate(graph.adjacency)}


def luby_mis(graph, seed: int | np.random.Generator, phase_cap: int | None = None) -> MisResult:
    """Maximal independent set by random priorities.

    ``graph`` is a networkx graph, an adjacency mapping, or an
    :class:`EdgeColouredGraph`. In each phase every live node draws a
    priority; nodes beating all live neighbours (ties by node order) join
    and they and their neighbours retire.
    """
    adj = _adjacency(graph)
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, LUBY_STREAM)
    if phase_cap is None:
        phase_cap = 64 * max(1, math.ceil(math.log2(max(len(adj), 2))))
    order = {v: i for i, v in enumerate(sorted(adj, key=repr))}
    live = set(adj)
    chosen: set = set()
    phases = 0
    while live:
        if phases == phase_cap:
            raise ResourceError(f"Luby MIS did not finish within {phase_cap} phases")
        phases += 1
        nodes = sorted(live, key=order.__getitem__)
        prio = dict(zip(nodes, rng.random(len(nodes))))
        joined = [v for v in nodes
                  if all((prio[v], -order[v]) > (prio[w], -order[w]) for w in adj[v] if w in live)]
        chosen.update(joined)
        for v in joined:
            live.discard(v)
            live -= adj[v]
    return MisResult(frozenset(chosen), phases)


def default_phase_cap(n: int) -> int:
    return 64 * math.ceil(math.log2(n + 1)) + 64


def moser_tardos_solve(instance: LllInstance, seed: int,
                       phase_cap: int | None = None) -> tuple[Assignment, SolveStats]:
    """Resample an MIS of violated events until none is violated.

    On hitting ``phase_cap`` the last assignment is returned with
    ``success=False``.
    """
    if phase_cap is None:
        phase_cap = default_phase_cap(instance.num_events)
    if phase_cap < 1:
        raise PreconditionError("phase_cap must be at least 1")
    rng = stream(seed, MT_STREAM)
    luby_rng = stream(seed, LUBY_STREAM)
    sizes = np.array([size for _, size in instance.variables], dtype=np.int64)
    value = rng.integers(0, sizes) if len(sizes) else np.zeros(0, dtype=np.int64)
    deps = [set() for _ in range(instance.num_events)]
    for events in instance.events_of_variable():
        for a in events:
            deps[a].update(b for b in events if b != a)

    def violated() -> list[int]:
        return [k for k, vars_ in enumerate(instance.event_vars)
                if instance.occurs(k, [value[x] for x in vars_])]

    phases = mis_rounds = 0
    bad = violated()
    while bad:
        if phases == phase_cap:
            stats = SolveStats(False, phases, mis_rounds, mis_rounds + phases, seed)
            return Assignment([int(x) for x in value]), stats
        phases += 1
        live = set(bad)
        mis = luby_mis({k: deps[k] & live for k in bad}, luby_rng)
        mis_rounds += mis.rounds
        selected = sorted(mis.nodes)
        touched: set[int] = set()
        for k in selected:
            vars_ = set(instance.event_vars[k])
            assert not (vars_ & touched), "selected events share a variable"
            touched |= vars_
        for x in sorted(touched):
            value[x] = rng.integers(0, sizes[x])
        bad = violated()
    result = Assignment([int(x) for x in value])
    assert check_assignment(instance, result)
    return result, SolveStats(True, phases, mis_rounds, mis_rounds + phases, seed)
