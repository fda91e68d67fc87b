"""Sinkless orientation on 3-regular graphs via an LLL algorithm on 4-regular graphs.

Pipeline: contract the colour-2 edges of ``G`` into a 4-regular ``G'``,
encode sinkless orientation of ``G'`` as an LLL instance, solve it, and lift
the orientation back. In the LOCAL simulation each colour-2 edge elects a
leader that runs the ``G'`` node; one ``G'`` round costs 3 ``G`` rounds.

Variable convention: edge ``(a, b)`` with ``a < b`` is variable ``"a-b"``;
value 0 means ``a -> b`` and value 1 means ``b -> a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import PreconditionError
from .graph_core import EdgeColouredGraph, validate
from .local_sim import (MessageAlgorithm, MessageRun, NodeView, RandomTape, check_girth,
                        run_message_passing, sample_tape)
from .mt_solver import SolveStats, moser_tardos_solve
from .problems import Assignment, LllInstance, Orientation

__all__ = [
    "ContractionMap",
    "LeaderAssignment",
    "build_so_lll_instance",
    "orientation_from_assignment",
    "contract_colour2",
    "elect_leaders",
    "leader_tape",
    "simulate_in_contracted",
    "SimulationResult",
    "lift_orientation",
    "solve_so_via_lll",
    "ReductionResult",
    "SETUP_ROUNDS",
    "LIFT_ROUNDS",
    "DILATION",
]

SETUP_ROUNDS = 2  # exchange tapes and labels; relays report their G' neighbours
LIFT_ROUNDS = 1  # leader hands its result to the relay
DILATION = 3


def build_so_lll_instance(graph: EdgeColouredGraph) -> LllInstance:
    """One binary variable per edge; node ``v``'s event is "every edge points at ``v``"."""
    verdict = validate(graph, require_colouring=False)
    if not verdict or graph.d != 4:
        raise PreconditionError(f"need a simple 4-regular graph ({verdict.reason or f'd={graph.d}'})")
    variables = [(f"{a}-{b}", 2) for a, b in graph.edges]
    incident: list[list[int]] = [[] for _ in range(graph.n)]
    for i, (a, b) in enumerate(graph.edges):
        incident[a].append(i)
        incident[b].append(i)
    events = []
    for v in range(graph.n):
        # inward at v: value 0 if v is the larger endpoint, 1 otherwise
        inward = tuple(0 if graph.edges[i][1] == v else 1 for i in incident[v])
        events.append((incident[v], [inward]))
    return LllInstance.build(variables, events)


def orientation_from_assignment(graph: EdgeColouredGraph, assignment: Assignment) -> Orientation:
    return Orientation({(a, b): b if x == 0 else a for (a, b), x in zip(graph.edges, assignment.value)})


@dataclass(frozen=True)
class ContractionMap:
    """``G'`` together with the correspondences back to ``G``.

    Contracted node ``a`` is the ``a``-th colour-2 edge of ``G`` in sorted
    edge order; ``ell`` maps each ``G'`` edge to the colour-0/1 edge of ``G``
    it came from.
    """

    source: EdgeColouredGraph
    contracted: EdgeColouredGraph
    members: tuple[tuple[int, int], ...]  # a -> colour-2 edge (u, v)
    node_of: Mapping[int, int]  # G node -> contracted node
    ell: Mapping[tuple[int, int], tuple[int, int]]
    ell_inv: Mapping[tuple[int, int], tuple[int, int]]

    def edge_node(self, e: tuple[int, int]) -> int:
        return self.node_of[e[0]]


def contract_colour2(graph: EdgeColouredGraph) -> ContractionMap:
    verdict = validate(graph)
    if not verdict:
        raise PreconditionError(f"invalid input graph: {verdict.reason}")
    if graph.d != 3:
        raise PreconditionError("contraction needs a 3-regular graph")
    check_girth(graph, 5)
    members = tuple(e for e, c in zip(graph.edges, graph.colours) if c == 2)
    node_of = {}
    for a, (u, v) in enumerate(members):
        node_of[u] = node_of[v] = a
    ell, ell_inv = {}, {}
    for (u, v), c in zip(graph.edges, graph.colours):
        if c == 2:
            continue
        a, b = node_of[u], node_of[v]
        key = (min(a, b), max(a, b))
        if a == b or key in ell:
            raise PreconditionError(f"contraction is not simple at {key}")
        ell[key] = (u, v)
        ell_inv[(u, v)] = key
    contracted = EdgeColouredGraph.from_edges(len(members), 4, sorted(ell))
    return ContractionMap(graph, contracted, members, node_of, ell, ell_inv)


@dataclass(frozen=True)
class LeaderAssignment:
    """Leader and relay per contracted node; ``ties`` lists nodes whose y-substreams coincided."""

    leader: tuple[int, ...]
    relay: tuple[int, ...]
    ties: frozenset = frozenset()

    @property
    def tie_assisted(self) -> bool:
        return bool(self.ties)


def _leads(y_me: str, y_other: str, me: int, other: int) -> bool:
    if y_me != y_other:
        return y_me > y_other
    return me < other


def elect_leaders(cmap: ContractionMap, tape: RandomTape) -> LeaderAssignment:
    """The endpoint with the larger y-substream leads; equal y falls back to the lower index."""
    if tape.R < 2:
        raise PreconditionError("leader election needs R >= 2 so that y and z are non-empty")
    leaders, relays, ties = [], [], set()
    for a, (u, v) in enumerate(cmap.members):
        if tape.y(u) == tape.y(v):
            ties.add(a)
        lead = u if _leads(tape.y(u), tape.y(v), u, v) else v
        leaders.append(lead)
        relays.append(u + v - lead)
    return LeaderAssignment(tuple(leaders), tuple(relays), frozenset(ties))


def leader_tape(tape: RandomTape, leaders: LeaderAssignment) -> RandomTape:
    """Tape of ``G'``: each contracted node gets its leader's z-substream."""
    Rz = (tape.R + 1) // 2
    return RandomTape(Rz, tuple(int(tape.z(v), 2) for v in leaders.leader))


class _Contracted(MessageAlgorithm):
    """Runs a ``G'`` algorithm on ``G`` through leaders and relays.

    ``G`` rounds 1-2 are setup. ``G'`` round ``r`` occupies ``G`` rounds
    ``3r``, ``3r+1``, ``3r+2``: leader -> relay, across colours 0/1,
    relay -> leader. The leader's result travels to the relay in the next
    leader -> relay step, when both announce.
    """

    def __init__(self, inner: MessageAlgorithm, n_contracted: int):
        self.inner = inner
        self.n_contracted = n_contracted

    def init(self, view: NodeView):
        return {"view": view, "a": view.label, "round": 0, "lead": None, "nbrs": {},
                "inner": None, "inner_round": 0, "result": None, "done": False,
                "outbox": {}, "inbox": {}}

    def send(self, st, g):
        view = st["view"]
        if g == 1:
            return {c: (view.node, view.tape, st["a"]) for c in range(3)}
        if g == 2:
            return {} if st["lead"] else {2: dict(st["nbrs"])}
        phase = (g - 3) % 3
        if phase == 0:
            if not st["lead"]:
                return {}
            msg = {"result": st["result"]}
            if st["inner"] is not None:
                out = self.inner.send(st["inner"], (g - 3) // 3 + 1)
                st["outbox"] = out
                msg["relay"] = {b: out[b] for b in st["relay_nbrs"].values() if b in out}
            return {2: msg}
        if phase == 1:
            return {c: (st["a"], st["outbox"][b]) for c, b in st["nbrs"].items() if b in st["outbox"]}
        return {} if st["lead"] else {2: dict(st["inbox"])}

    def receive(self, st, g, inbox):
        st = dict(st)
        view = st["view"]
        if g == 1:
            pid, ptape, _ = inbox[2]
            R = view.R
            y_me = format(view.tape, f"0{R}b")[1::2]
            y_other = format(ptape, f"0{R}b")[1::2]
            st["lead"] = _leads(y_me, y_other, view.node, pid)
            st["nbrs"] = {c: inbox[c][2] for c in (0, 1)}
            st["z"] = int(format(view.tape if st["lead"] else ptape, f"0{R}b")[0::2], 2)
            return st
        if g == 2:
            if st["lead"]:
                st["relay_nbrs"] = dict(inbox[2])
                ports = tuple(sorted(set(st["nbrs"].values()) | set(st["relay_nbrs"].values())))
                sub = NodeView(st["a"], ports, st["z"], (view.R + 1) // 2, self.n_contracted, 4)
                st["inner"] = self.inner.init(sub)
                st["result"] = self.inner.output(st["inner"])
            return st
        phase = (g - 3) % 3
        r = (g - 3) // 3 + 1
        if phase == 0:
            if st["lead"]:
                if st["result"] is not None:
                    st["done"] = True
            else:
                msg = inbox.get(2, {})
                if msg.get("result") is not None:
                    st["result"], st["done"] = msg["result"], True
                st["outbox"] = msg.get("relay", {})
            return st
        if phase == 1:
            st["inbox"] = {a: m for a, m in inbox.values()}
            return st
        if st["lead"]:
            merged = dict(st["inbox"])
            merged.update(inbox.get(2, {}))
            st["inner"] = self.inner.receive(st["inner"], r, merged)
            st["inner_round"] = r
            if st["result"] is None:
                st["result"] = self.inner.output(st["inner"])
        return st

    def output(self, st):
        if not st["done"]:
            return None
        return (st["a"], st["result"])


@dataclass
class SimulationResult:
    outputs: list  # per contracted node
    rounds_used: int  # G rounds
    leaders: LeaderAssignment
    run: MessageRun = field(repr=False)


def simulate_in_contracted(algorithm: MessageAlgorithm, graph: EdgeColouredGraph, tape: RandomTape,
                           max_rounds: int, cmap: ContractionMap | None = None) -> SimulationResult:
    """Run a ``G'`` algorithm on ``G``; at most ``3 T + 3`` rounds for a ``T``-round algorithm.

    The inner algorithm sees ``G'`` ports as sorted contracted-neighbour ids
    and the leader's z-substream as its tape, exactly as a direct run on
    ``cmap.contracted`` with :func:`leader_tape` would.
    """
    cmap = cmap or contract_colour2(graph)
    leaders = elect_leaders(cmap, tape)
    labels = [cmap.node_of[v] for v in range(graph.n)]
    run = run_message_passing(_Contracted(algorithm, cmap.contracted.n), graph, tape, max_rounds, labels)
    outputs = [None] * cmap.contracted.n
    for v in leaders.leader:
        a, result = run.outputs[v]
        outputs[a] = result
    return SimulationResult(outputs, run.rounds_used, leaders, run)


def lift_orientation(sigma: Orientation, cmap: ContractionMap, leaders: LeaderAssignment) -> Orientation:
    """Colour-0/1 edges copy their ``G'`` edge; colour-2 edge ``e`` points at the relay
    iff the relay already has an outgoing colour-0/1 edge, else at the leader."""
    g = cmap.source
    heads = {}
    for e, c in zip(g.edges, g.colours):
        if c == 2:
            continue
        head_a = sigma.heads[cmap.ell_inv[e]]
        u, v = e
        heads[e] = u if cmap.node_of[u] == head_a else v
    for a, e in enumerate(cmap.members):
        r = leaders.relay[a]
        out = any(heads[(min(r, w), max(r, w))] != r for w in (g.neighbour(r, 0), g.neighbour(r, 1)))
        heads[e] = r if out else leaders.leader[a]
    return Orientation(heads)


@dataclass
class ReductionResult:
    orientation: Orientation | None
    stats: SolveStats
    cmap: ContractionMap
    leaders: LeaderAssignment
    instance: LllInstance
    contracted_orientation: Orientation | None


def solve_so_via_lll(graph: EdgeColouredGraph, seed: int, phase_cap: int | None = None,
                     R: int = 2) -> ReductionResult:
    """Contract, solve the 4-regular LLL instance by Moser-Tardos, and lift.

    ``orientation`` is ``None`` when Moser-Tardos hit its phase cap.
    """
    cmap = contract_colour2(graph)
    instance = build_so_lll_instance(cmap.contracted)
    assignment, stats = moser_tardos_solve(instance, seed, phase_cap)
    leaders = elect_leaders(cmap, sample_tape(graph, R, seed))
    if not stats.success:
        return ReductionResult(None, stats, cmap, leaders, instance, None)
    sigma = orientation_from_assignment(cmap.contracted, assignment)
    return ReductionResult(lift_orientation(sigma, cmap, leaders), stats, cmap, leaders, instance, sigma)


def sidecar(cmap: ContractionMap, leaders: LeaderAssignment | None = None) -> dict[str, Any]:
    """JSON-ready node_of / ell / leader tables."""
    out: dict[str, Any] = {
        "node_of": {str(v): a for v, a in sorted(cmap.node_of.items())},
        "members": [list(e) for e in cmap.members],
        "ell": [[list(k), list(v)] for k, v in sorted(cmap.ell.items())],
    }
    if leaders is not None:
        out["leader"] = list(leaders.leader)
        out["relay"] = list(leaders.relay)
        out["ties"] = sorted(leaders.ties)
    return out
