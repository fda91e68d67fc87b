"""Sinkless orientation / sinkless colouring verifiers and explicit LLL instances."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import networkx as nx

from .errors import FormatError, PreconditionError
from .graph_core import EdgeColouredGraph

__all__ = [
    "Orientation",
    "Colouring",
    "LllInstance",
    "Assignment",
    "CriterionVerdict",
    "AssignmentVerdict",
    "verify_orientation",
    "verify_colouring",
    "orient_from_colouring",
    "colour_from_orientation",
    "dependency_graph",
    "check_lll_criterion",
    "check_assignment",
    "EP_D_PLUS_1",
    "FOUR_P_D",
    "format_lll",
    "parse_lll",
    "format_orientation",
    "parse_orientation",
    "format_colouring",
    "parse_colouring",
]


@dataclass(frozen=True)
class Orientation:
    """Edge ``(u, v)`` (``u < v``) points towards ``heads[(u, v)]``.

    ``ties`` lists edges whose direction was decided by the index-based
    fallback because the relevant tapes were fully symmetric.
    """

    heads: Mapping[tuple[int, int], int]
    ties: frozenset = frozenset()

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple[int, int]]) -> "Orientation":
        return cls({(min(a, b), max(a, b)): b for a, b in arcs})

    def arc(self, edge: tuple[int, int]) -> tuple[int, int]:
        u, v = edge
        head = self.heads[(min(u, v), max(u, v))]
        return (u + v - head, head)

    def arcs(self) -> list[tuple[int, int]]:
        return [self.arc(e) for e in sorted(self.heads)]

    def outdeg(self, n: int) -> list[int]:
        out = [0] * n
        for (u, v), h in self.heads.items():
            out[u + v - h] += 1
        return out


@dataclass(frozen=True)
class Colouring:
    colour: tuple[int, ...]

    def __getitem__(self, v: int) -> int:
        return self.colour[v]

    def __len__(self) -> int:
        return len(self.colour)


def verify_orientation(graph: EdgeColouredGraph, orientation: Orientation) -> list[int]:
    """Return all sinks; an empty list means the orientation is sinkless."""
    if set(orientation.heads) != set(graph.edges):
        raise PreconditionError("orientation must cover exactly the graph's edges")
    for (u, v), h in orientation.heads.items():
        if h not in (u, v):
            raise PreconditionError(f"head {h} is not an endpoint of {(u, v)}")
    out = orientation.outdeg(graph.n)
    return [v for v in range(graph.n) if out[v] == 0]


def verify_colouring(graph: EdgeColouredGraph, colouring: Colouring | Sequence[int]) -> list[tuple[int, int]]:
    """Return every edge ``e = {u, v}`` with ``phi(u) = phi(v) = psi(e)``."""
    phi = colouring.colour if isinstance(colouring, Colouring) else tuple(colouring)
    if len(phi) != graph.n:
        raise PreconditionError("colouring must assign every node")
    if graph.colours is None:
        raise PreconditionError("sinkless colouring needs an edge-coloured graph")
    if any(not 0 <= c < graph.d for c in phi):
        raise PreconditionError(f"colours must lie in [0, {graph.d})")
    return [(u, v) for (u, v), c in zip(graph.edges, graph.colours) if phi[u] == c == phi[v]]


def orient_from_colouring(graph: EdgeColouredGraph, colouring: Colouring | Sequence[int]) -> Orientation:
    """Each node points its own-colour edge outward; leftover edges go towards the larger index.

    From a sinkless colouring no edge is claimed by both endpoints.
    """
    phi = colouring.colour if isinstance(colouring, Colouring) else tuple(colouring)
    heads = {}
    for (u, v), c in zip(graph.edges, graph.colours):
        if phi[u] == c and phi[v] != c:
            heads[(u, v)] = v
        elif phi[v] == c and phi[u] != c:
            heads[(u, v)] = u
        else:
            heads[(u, v)] = v
    return Orientation(heads)


def colour_from_orientation(graph: EdgeColouredGraph, orientation: Orientation) -> Colouring:
    """Each node takes the smallest colour among its outgoing edges (0 if it is a sink)."""
    best = [graph.d] * graph.n
    for (u, v), c in zip(graph.edges, graph.colours):
        tail = u + v - orientation.heads[(u, v)]
        best[tail] = min(best[tail], c)
    return Colouring(tuple(0 if b == graph.d else b for b in best))


# --- explicit LLL instances ------------------------------------------------

@dataclass(frozen=True)
class LllInstance:
    """Finite variables with explicit bad-tuple tables per event.

    ``bad[k]`` holds the bad tuples of event ``k`` packed in mixed radix
    (first variable most significant), sorted ascending.
    """

    variables: tuple[tuple[str, int], ...]
    event_vars: tuple[tuple[int, ...], ...]
    bad: tuple[tuple[int, ...], ...]

    @classmethod
    def build(cls, variables: Sequence[tuple[str, int]],
              events: Sequence[tuple[Sequence[int], Iterable[Sequence[int]]]]) -> "LllInstance":
        variables = tuple((str(name), int(size)) for name, size in variables)
        event_vars = []
        bad = []
        for vars_, tuples in events:
            vars_ = tuple(int(x) for x in vars_)
            sizes = [variables[x][1] for x in vars_]
            packed = set()
            for tup in tuples:
                if len(tup) != len(vars_):
                    raise PreconditionError("bad tuple arity does not match event")
                for val, size in zip(tup, sizes):
                    if not 0 <= val < size:
                        raise PreconditionError(f"value {val} outside domain of size {size}")
                packed.add(_pack(tup, sizes))
            event_vars.append(vars_)
            bad.append(tuple(sorted(packed)))
        return cls(variables, tuple(event_vars), tuple(bad))

    @property
    def num_events(self) -> int:
        return len(self.event_vars)

    def sizes(self, k: int) -> list[int]:
        return [self.variables[x][1] for x in self.event_vars[k]]

    def probability(self, k: int) -> Fraction:
        return Fraction(len(self.bad[k]), math.prod(self.sizes(k)))

    def occurs(self, k: int, values: Sequence[int]) -> bool:
        key = _pack(values, self.sizes(k))
        bad = self.bad[k]
        i = bisect.bisect_left(bad, key)
        return i < len(bad) and bad[i] == key

    def bad_tuples(self, k: int) -> list[tuple[int, ...]]:
        return [_unpack(x, self.sizes(k)) for x in self.bad[k]]

    def events_of_variable(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.variables]
        for k, vars_ in enumerate(self.event_vars):
            for x in vars_:
                out[x].append(k)
        return out


@dataclass
class Assignment:
    value: list[int]

    def restrict(self, instance: LllInstance, k: int) -> tuple[int, ...]:
        return tuple(self.value[x] for x in instance.event_vars[k])


def _pack(values: Sequence[int], sizes: Sequence[int]) -> int:
    key = 0
    for val, size in zip(values, sizes):
        key = key * size + int(val)
    return key


def _unpack(key: int, sizes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for size in reversed(sizes):
        key, r = divmod(key, size)
        out.append(r)
    return tuple(reversed(out))


def dependency_graph(instance: LllInstance) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(instance.num_events))
    for events in instance.events_of_variable():
        for i, a in enumerate(events):
            for b in events[i + 1:]:
                if a != b:
                    g.add_edge(a, b)
    return g


EP_D_PLUS_1 = "e*p*(d+1)<=1"
FOUR_P_D = "4*p*d<=1"


@dataclass(frozen=True)
class CriterionVerdict:
    ok: bool
    p: Fraction
    d: int
    lhs: float | Fraction
    margin: float | Fraction  # 1 - lhs


def check_lll_criterion(instance: LllInstance, criterion: str | Callable[[int], float | Fraction]) -> CriterionVerdict:
    """Evaluate an LLL criterion with exact ``p`` and dependency degree ``d``.

    ``criterion`` is :data:`EP_D_PLUS_1`, :data:`FOUR_P_D`, or a function
    ``f`` for the form ``p * f(d) <= 1``. The e-criterion is irrational, so
    its comparison is done in floating point; the others stay exact when
    ``f`` returns integers or fractions.
    """
    p = max((instance.probability(k) for k in range(instance.num_events)), default=Fraction(0))
    dep = dependency_graph(instance)
    d = max((deg for _, deg in dep.degree()), default=0)
    if criterion == EP_D_PLUS_1:
        lhs = math.e * float(p) * (d + 1)
    elif criterion == FOUR_P_D:
        lhs = 4 * p * d
    elif callable(criterion):
        f = criterion(d)
        lhs = p * (Fraction(f) if isinstance(f, int) else f)
    else:
        raise PreconditionError(f"unknown criterion {criterion!r}")
    return CriterionVerdict(lhs <= 1, p, d, lhs, 1 - lhs)


@dataclass(frozen=True)
class AssignmentVerdict:
    ok: bool
    reason: str = ""
    witness: object = None

    def __bool__(self) -> bool:
        return self.ok


def check_assignment(instance: LllInstance,
                     per_event: Sequence[Mapping[int, int]] | Assignment) -> AssignmentVerdict:
    """Check agreement on shared variables and that no event occurs.

    ``per_event[k]`` maps each variable of event ``k`` to its value. A global
    :class:`Assignment` is accepted too and is trivially consistent.
    """
    if isinstance(per_event, Assignment):
        per_event = [{x: per_event.value[x] for x in vars_} for vars_ in instance.event_vars]
    if len(per_event) != instance.num_events:
        raise PreconditionError("one assignment per event required")
    for k, vars_ in enumerate(instance.event_vars):
        missing = set(vars_) - set(per_event[k])
        if missing:
            raise PreconditionError(f"event {k} lacks values for variables {sorted(missing)}")
        for x, size in zip(vars_, instance.sizes(k)):
            if not 0 <= per_event[k][x] < size:
                return AssignmentVerdict(False, "value out of range", (k, x))
    for x, events in enumerate(instance.events_of_variable()):
        for a in events:
            for b in events:
                if a < b and per_event[a][x] != per_event[b][x]:
                    return AssignmentVerdict(False, "disagreement on shared variable", (a, b, x))
    for k, vars_ in enumerate(instance.event_vars):
        if instance.occurs(k, [per_event[k][x] for x in vars_]):
            return AssignmentVerdict(False, "bad event occurs", k)
    return AssignmentVerdict(True)


# --- text formats ----------------------------------------------------------

def format_lll(instance: LllInstance, comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"variables {len(instance.variables)}")
    lines += [f"{name} {size}" for name, size in instance.variables]
    lines.append(f"events {instance.num_events}")
    for k, vars_ in enumerate(instance.event_vars):
        lines.append(" ".join(map(str, [len(vars_), *vars_, len(instance.bad[k])])))
        lines += [" ".join(map(str, tup)) for tup in instance.bad_tuples(k)]
    return "\n".join(lines) + "\n"


def parse_lll(text: str, source: str = "<lll>") -> LllInstance:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    pos = 0

    def take(expected_key: str | None = None):
        nonlocal pos
        if pos >= len(rows):
            raise FormatError(source, rows[-1][0] if rows else 0, "unexpected end of file")
        lineno, parts = rows[pos]
        pos += 1
        if expected_key is not None:
            if len(parts) != 2 or parts[0] != expected_key:
                raise FormatError(source, lineno, f"expected '{expected_key} <count>'")
            return lineno, [_int(source, lineno, parts[1])]
        return lineno, parts

    _, (k,) = take("variables")
    variables = []
    for _ in range(k):
        lineno, parts = take()
        if len(parts) != 2:
            raise FormatError(source, lineno, "variable line must be 'name domain_size'")
        size = _int(source, lineno, parts[1])
        if size < 1:
            raise FormatError(source, lineno, "domain size must be positive")
        variables.append((parts[0], size))
    _, (m,) = take("events")
    events = []
    for _ in range(m):
        lineno, parts = take()
        nums = [_int(source, lineno, p) for p in parts]
        if not nums or len(nums) != nums[0] + 2:
            raise FormatError(source, lineno, "event line must be 'arity v_1 .. v_arity bad_count'")
        vars_ = nums[1:-1]
        if any(not 0 <= x < k for x in vars_):
            raise FormatError(source, lineno, "event references unknown variable")
        tuples = []
        for _ in range(nums[-1]):
            tl, tparts = take()
            tup = [_int(source, tl, p) for p in tparts]
            if len(tup) != len(vars_):
                raise FormatError(source, tl, "bad tuple arity mismatch")
            if any(not 0 <= val < variables[x][1] for val, x in zip(tup, vars_)):
                raise FormatError(source, tl, "bad tuple value outside domain")
            tuples.append(tup)
        events.append((vars_, tuples))
    if pos != len(rows):
        raise FormatError(source, rows[pos][0], "trailing content")
    return LllInstance.build(variables, events)


def _int(source: str, lineno: int, token: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(source, lineno, f"expected integer, got {token!r}") from None


def format_orientation(orientation: Orientation, comments: Sequence[str] = ()) -> str:
    """One ``tail head`` line per edge, sorted by edge."""
    lines = [f"# {c}" for c in comments]
    lines += [f"{a} {b}" for a, b in orientation.arcs()]
    return "\n".join(lines) + "\n"


def parse_orientation(text: str, source: str = "<orientation>") -> Orientation:
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(source, lineno, "expected 'tail head'")
        arcs.append((_int(source, lineno, parts[0]), _int(source, lineno, parts[1])))
    return Orientation.from_arcs(arcs)


def format_colouring(colouring: Colouring | Sequence[int], comments: Sequence[str] = ()) -> str:
    """One colour per line in node order."""
    phi = colouring.colour if isinstance(colouring, Colouring) else tuple(colouring)
    lines = [f"# {c}" for c in comments]
    lines += [str(c) for c in phi]
    return "\n".join(lines) + "\n"


def parse_colouring(text: str, source: str = "<colouring>") -> Colouring:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(_int(source, lineno, line))
    return Colouring(tuple(out))
