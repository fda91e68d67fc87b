"""Regular, properly edge-coloured graphs: construction, validation, girth.

Nodes are dense integers ``0 .. n-1``. Edges are stored as sorted pairs
``(u, v)`` with ``u < v``; ``colours[i]`` is the colour of ``edges[i]``.
A graph may be uncoloured (``colours is None``), e.g. the output of
:func:`bipartite_double_cover` before colouring, or a contracted graph.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, PreconditionError, ResourceError

__all__ = [
    "EdgeColouredGraph",
    "GirthReport",
    "Verdict",
    "validate",
    "girth",
    "is_bipartite",
    "bipartite_double_cover",
    "konig_edge_colour",
    "generate_regular_high_girth",
    "read_graph",
    "write_graph",
    "format_graph",
    "parse_graph",
]

DEFAULT_ATTEMPT_CAP = 10_000
RESTART_AFTER = 100


@dataclass(frozen=True)
class EdgeColouredGraph:
    n: int
    d: int
    edges: tuple[tuple[int, int], ...]
    colours: tuple[int, ...] | None = None

    @classmethod
    def from_edges(cls, n: int, d: int, edges: Iterable[Sequence[int]],
                   colours: Iterable[int] | None = None) -> "EdgeColouredGraph":
        """Normalise endpoints to ``u < v`` and sort edges by ``(u, v)``."""
        pairs = [(min(e[0], e[1]), max(e[0], e[1])) for e in edges]
        if colours is None:
            return cls(n, d, tuple(sorted(pairs)), None)
        cols = list(colours)
        if len(cols) != len(pairs):
            raise ValueError("one colour per edge required")
        order = sorted(range(len(pairs)), key=lambda i: pairs[i])
        return cls(n, d, tuple(pairs[i] for i in order), tuple(cols[i] for i in order))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_coloured(self) -> bool:
        return self.colours is not None

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            if v != u:
                adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def port_table(self) -> np.ndarray:
        """``port_table[v, c]`` is the neighbour of ``v`` across its colour-``c`` edge.

        Only meaningful for validated coloured graphs; missing entries are -1.
        """
        if self.colours is None:
            raise PreconditionError("graph has no edge colouring")
        table = np.full((self.n, self.d), -1, dtype=np.int64)
        for (u, v), c in zip(self.edges, self.colours):
            table[u, c] = v
            table[v, c] = u
        return table

    def neighbour(self, v: int, colour: int) -> int:
        w = int(self.port_table[v, colour])
        if w < 0:
            raise PreconditionError(f"node {v} has no edge of colour {colour}")
        return w

    def colour_of(self, u: int, v: int) -> int:
        if self.colours is None:
            raise PreconditionError("graph has no edge colouring")
        return self.colours[self.edge_index[(min(u, v), max(u, v))]]

    def with_colours(self, colours: Sequence[int]) -> "EdgeColouredGraph":
        return EdgeColouredGraph(self.n, self.d, self.edges, tuple(int(c) for c in colours))

    @cached_property
    def girth_report(self) -> "GirthReport":
        return girth(self)

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        if self.colours is None:
            g.add_edges_from(self.edges)
        else:
            for (u, v), c in zip(self.edges, self.colours):
                g.add_edge(u, v, colour=c)
        return g


@dataclass(frozen=True)
class GirthReport:
    girth: float  # math.inf for forests
    witness_cycle: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""
    witness: object = None

    def __bool__(self) -> bool:
        return self.ok


def validate(graph: EdgeColouredGraph, require_colouring: bool = True) -> Verdict:
    """Check simplicity, d-regularity and properness of the edge colouring.

    With ``require_colouring=False`` an uncoloured graph passes on simplicity
    and regularity alone.
    """
    seen: set[tuple[int, int]] = set()
    for u, v in graph.edges:
        if not (0 <= u < graph.n and 0 <= v < graph.n):
            return Verdict(False, "node out of range", (u, v))
        if u == v:
            return Verdict(False, "loop", (u, v))
        if (u, v) in seen:
            return Verdict(False, "parallel edge", (u, v))
        seen.add((u, v))
    degree = [0] * graph.n
    for u, v in graph.edges:
        degree[u] += 1
        degree[v] += 1
    for v, k in enumerate(degree):
        if k != graph.d:
            return Verdict(False, f"degree {k} != {graph.d}", v)
    if graph.colours is None:
        return Verdict(not require_colouring, "" if not require_colouring else "missing edge colouring")
    incident: list[dict[int, tuple[int, int]]] = [dict() for _ in range(graph.n)]
    for e, c in zip(graph.edges, graph.colours):
        if not 0 <= c < graph.d:
            return Verdict(False, f"colour {c} outside [0, {graph.d})", e)
        for w in e:
            if c in incident[w]:
                return Verdict(False, f"improper colouring at node {w}", (w, incident[w][c], e))
            incident[w][c] = e
    return Verdict(True)


def girth(graph: EdgeColouredGraph) -> GirthReport:
    """Shortest cycle by breadth-first search from every node."""
    adj = graph.adjacency
    best = math.inf
    best_cycle: tuple[int, ...] | None = None
    for root in range(graph.n):
        if best == 3:
            break
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            x = queue.popleft()
            if 2 * dist[x] + 1 >= best:
                break
            for w in adj[x]:
                if w not in dist:
                    dist[w] = dist[x] + 1
                    parent[w] = x
                    queue.append(w)
                elif w != parent[x]:
                    length = dist[x] + dist[w] + 1
                    if length < best:
                        best = length
                        best_cycle = _close_cycle(parent, x, w)
    return GirthReport(best, best_cycle)


def _close_cycle(parent: dict[int, int], x: int, w: int) -> tuple[int, ...]:
    def path(v: int) -> list[int]:
        out = []
        while v != -1:
            out.append(v)
            v = parent[v]
        return out

    px, pw = path(x), path(w)  # both end at the root
    # trim the shared suffix, keeping the meeting node once
    while len(px) > 1 and len(pw) > 1 and px[-2] == pw[-2]:
        px.pop()
        pw.pop()
    return tuple(px + pw[-2::-1])


def is_bipartite(graph: EdgeColouredGraph) -> tuple[bool, list[int] | None]:
    side = [-1] * graph.n
    adj = graph.adjacency
    for s in range(graph.n):
        if side[s] != -1:
            continue
        side[s] = 0
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for w in adj[x]:
                if side[w] == -1:
                    side[w] = 1 - side[x]
                    queue.append(w)
                elif side[w] == side[x]:
                    return False, None
    return True, side


def bipartite_double_cover(graph: EdgeColouredGraph) -> EdgeColouredGraph:
    """Tensor product with K2; node ``(v, s)`` is numbered ``v + s*n``.

    Edge colours carry over: the lift of an edge keeps the colour of its
    projection, which is again proper. Uncoloured input gives uncoloured output.
    """
    n = graph.n
    edges = []
    colours = [] if graph.colours is not None else None
    for i, (u, v) in enumerate(graph.edges):
        edges.append((u, v + n))
        edges.append((u + n, v))
        if colours is not None:
            colours.extend([graph.colours[i]] * 2)
    return EdgeColouredGraph.from_edges(2 * n, graph.d, edges, colours)


def _perfect_matching(adj: list[list[int]], left: list[int]) -> dict[int, int]:
    """Kuhn's augmenting-path maximum matching; returns ``left node -> right node``."""
    match_right: dict[int, int] = {}

    def augment(u: int, visited: set[int]) -> bool:
        for r in adj[u]:
            if r in visited:
                continue
            visited.add(r)
            if r not in match_right or augment(match_right[r], visited):
                match_right[r] = u
                return True
        return False

    for u in left:
        augment(u, set())
    return {a: b for b, a in match_right.items()}


def konig_edge_colour(graph: EdgeColouredGraph) -> EdgeColouredGraph:
    """Colour a bipartite d-regular graph with d colours by peeling perfect matchings."""
    ok, side = is_bipartite(graph)
    if not ok:
        raise PreconditionError("konig_edge_colour requires a bipartite graph")
    degree = [0] * graph.n
    for u, v in graph.edges:
        degree[u] += 1
        degree[v] += 1
    if any(k != graph.d for k in degree):
        raise PreconditionError(f"konig_edge_colour requires a {graph.d}-regular graph")
    left = [v for v in range(graph.n) if side[v] == 0]
    remaining: dict[tuple[int, int], int] = {}
    for u, v in graph.edges:
        a, b = (u, v) if side[u] == 0 else (v, u)
        remaining[(a, b)] = remaining.get((a, b), 0) + 1
    colour_of: dict[tuple[int, int], list[int]] = {}
    for c in range(graph.d):
        adj: list[list[int]] = [[] for _ in range(graph.n)]
        for (a, b), k in remaining.items():
            if k > 0:
                adj[a].append(b)
        matching = _perfect_matching(adj, left)
        if len(matching) != len(left):
            raise PreconditionError("no perfect matching found; input not regular bipartite")
        for a, b in matching.items():
            remaining[(a, b)] -= 1
            colour_of.setdefault((min(a, b), max(a, b)), []).append(c)
    colours = [colour_of[e].pop() for e in graph.edges]
    return graph.with_colours(colours)


def _near(adj: list[list[int]], source: int, radius: int) -> set[int]:
    """Nodes within ``radius`` hops of ``source``."""
    seen = {source}
    frontier = [source]
    for _ in range(radius):
        nxt = []
        for x in frontier:
            for w in adj[x]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


def _draw_matching(adj: list[list[int]], half: int, girth_min: int,
                   rng: np.random.Generator) -> list[tuple[int, int]] | None:
    """Random greedy perfect matching whose edges close no cycle shorter than ``girth_min``."""
    free = set(range(half, 2 * half))
    added = []
    for a in rng.permutation(half):
        a = int(a)
        options = sorted(free - _near(adj, a, girth_min - 2))
        if not options:
            for x, y in added:
                adj[x].remove(y)
                adj[y].remove(x)
            return None
        b = options[int(rng.integers(len(options)))]
        free.discard(b)
        adj[a].append(b)
        adj[b].append(a)
        added.append((a, b))
    return added


def generate_regular_high_girth(n: int, d: int, girth_min: int, seed: int,
                                attempt_cap: int = DEFAULT_ATTEMPT_CAP) -> EdgeColouredGraph:
    """Union of ``d`` random perfect matchings between nodes ``[0, n/2)`` and ``[n/2, n)``.

    Matching ``c`` gets colour ``c``. Each matching is drawn greedily: left
    nodes in random order take a uniformly random free right node that is
    more than ``girth_min - 2`` hops away, so the union stays simple with
    girth at least ``girth_min``. A dead end counts as a failed attempt and
    the matching is redrawn; after :data:`RESTART_AFTER` consecutive failures
    the construction starts over. Every draw counts towards ``attempt_cap``.
    """
    if n % 2 or n <= 0:
        raise PreconditionError("n must be positive and even")
    if d < 2:
        raise PreconditionError("d must be at least 2")
    if girth_min < 3:
        raise PreconditionError("girth_min must be at least 3")
    half = n // 2
    rng = np.random.default_rng(seed)
    adj: list[list[int]] = [[] for _ in range(n)]
    matchings: list[list[tuple[int, int]]] = []
    failures = 0
    for _ in range(attempt_cap):
        if failures == RESTART_AFTER:
            adj, matchings, failures = [[] for _ in range(n)], [], 0
        new = _draw_matching(adj, half, girth_min, rng)
        if new is None:
            failures += 1
            continue
        matchings.append(new)
        failures = 0
        if len(matchings) == d:
            edges = [e for m in matchings for e in m]
            colours = [c for c, m in enumerate(matchings) for _ in m]
            g = EdgeColouredGraph.from_edges(n, d, edges, colours)
            assert g.girth_report.girth >= girth_min
            return g
    raise ResourceError(
        f"no simple {d}-regular graph on {n} nodes with girth >= {girth_min} "
        f"after {attempt_cap} attempts")


# --- text format -----------------------------------------------------------

def format_graph(graph: EdgeColouredGraph, comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"{graph.n} {graph.d}")
    order = sorted(range(graph.m), key=lambda i: graph.edges[i])
    for i in order:
        u, v = graph.edges[i]
        if graph.colours is None:
            lines.append(f"{u} {v}")
        else:
            lines.append(f"{u} {v} {graph.colours[i]}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str, source: str = "<graph>") -> EdgeColouredGraph:
    header = None
    edges = []
    colours: list[int] = []
    coloured = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise FormatError(source, lineno, f"expected integers, got {line!r}") from None
        if header is None:
            if len(values) != 2:
                raise FormatError(source, lineno, "header must be 'n d'")
            header = values
            continue
        if len(values) not in (2, 3):
            raise FormatError(source, lineno, "edge line must be 'u v c' or 'u v'")
        if coloured is None:
            coloured = len(values) == 3
        elif coloured != (len(values) == 3):
            raise FormatError(source, lineno, "mixed coloured and uncoloured edge lines")
        u, v = values[0], values[1]
        n, d = header
        if not (0 <= u < v < n):
            raise FormatError(source, lineno, f"need 0 <= u < v < {n}")
        if coloured:
            if not 0 <= values[2] < d:
                raise FormatError(source, lineno, f"colour {values[2]} outside [0, {d})")
            colours.append(values[2])
        edges.append((u, v))
    if header is None:
        raise FormatError(source, 0, "missing header line")
    return EdgeColouredGraph.from_edges(header[0], header[1], edges, colours if coloured else None)


def write_graph(path, graph: EdgeColouredGraph, comments: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        fh.write(format_graph(graph, comments))


def read_graph(path) -> EdgeColouredGraph:
    with open(path) as fh:
        return parse_graph(fh.read(), str(path))
